// Copyright 2026 The NARM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace narm::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == s.npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

char to_delim(const std::string& key, const std::string& v) {
  if (v == "tab" || v == "\\t" || v == "\t") return '\t';
  if (v == "comma" || v == ",") return ',';
  if (v.size() == 1) return v[0];
  throw ConfigError(key + ": expected a single-character delimiter, 'tab' or 'comma'");
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  const auto path_key = [&](std::string name, std::string help, std::filesystem::path RunConfig::*field) {
    k.push_back({std::move(name), std::move(help),
                 [field](RunConfig& c, const std::string& v) { c.*field = v; },
                 [field](const RunConfig& c) { return (c.*field).string(); }});
  };
  const auto double_key = [&](std::string name, std::string help, auto accessor) {
    k.push_back({name, std::move(help),
                 [name, accessor](RunConfig& c, const std::string& v) { accessor(c) = to_double(name, v); },
                 [accessor](const RunConfig& c) { return fmt(accessor(const_cast<RunConfig&>(c))); }});
  };
  const auto size_key = [&](std::string name, std::string help, auto accessor) {
    k.push_back({name, std::move(help),
                 [name, accessor](RunConfig& c, const std::string& v) {
                   using T = std::remove_reference_t<decltype(accessor(c))>;
                   accessor(c) = to_int<T>(name, v);
                 },
                 [accessor](const RunConfig& c) { return std::to_string(accessor(const_cast<RunConfig&>(c))); }});
  };
  const auto bool_key = [&](std::string name, std::string help, auto accessor) {
    k.push_back({name, std::move(help),
                 [name, accessor](RunConfig& c, const std::string& v) { accessor(c) = to_bool(name, v); },
                 [accessor](const RunConfig& c) {
                   return std::string(accessor(const_cast<RunConfig&>(c)) ? "true" : "false");
                 }});
  };
  const auto text_key = [&](std::string name, std::string help, auto accessor) {
    k.push_back({std::move(name), std::move(help),
                 [accessor](RunConfig& c, const std::string& v) { accessor(c) = v; },
                 [accessor](const RunConfig& c) { return accessor(const_cast<RunConfig&>(c)); }});
  };
  const auto string_key = [&](std::string name, std::string help, std::string RunConfig::*field) {
    text_key(std::move(name), std::move(help), [field](RunConfig& c) -> std::string& { return c.*field; });
  };

  path_key("input", "click log to preprocess", &RunConfig::input);
  path_key("out-dir", "directory receiving every output", &RunConfig::out_dir);
  path_key("train-examples", "training examples file", &RunConfig::train_examples);
  path_key("test-examples", "test examples file", &RunConfig::test_examples);
  path_key("vocab", "vocabulary file", &RunConfig::vocab);
  path_key("train-sessions", "training sessions (index form) for baselines", &RunConfig::train_sessions);
  path_key("checkpoint", "model checkpoint", &RunConfig::checkpoint);

  text_key("session-column", "session id column",
           [](RunConfig& c) -> std::string& { return c.preprocess.schema.session_column; });
  text_key("timestamp-column", "timestamp column",
           [](RunConfig& c) -> std::string& { return c.preprocess.schema.timestamp_column; });
  text_key("item-column", "item id column",
           [](RunConfig& c) -> std::string& { return c.preprocess.schema.item_column; });
  k.push_back({"delimiter", "field delimiter (comma, tab or one character)",
               [](RunConfig& c, const std::string& v) { c.preprocess.schema.delimiter = to_delim("delimiter", v); },
               [](const RunConfig& c) {
                 const char d = c.preprocess.schema.delimiter;
                 return d == '\t' ? std::string("tab") : d == ',' ? std::string("comma") : std::string(1, d);
               }});
  double_key("max-malformed-fraction", "abort when more rows than this are malformed",
             [](RunConfig& c) -> double& { return c.preprocess.schema.max_malformed_fraction; });
  size_key("min-session-len", "drop sessions shorter than this",
           [](RunConfig& c) -> std::size_t& { return c.preprocess.filter.min_session_len; });
  size_key("min-item-support", "drop items with fewer clicks",
           [](RunConfig& c) -> std::size_t& { return c.preprocess.filter.min_item_support; });
  bool_key("filter-fixpoint", "iterate the filters to a fixpoint",
           [](RunConfig& c) -> bool& { return c.preprocess.filter.fixpoint; });
  size_key("holdout-ms", "test window length in milliseconds",
           [](RunConfig& c) -> std::int64_t& { return c.preprocess.holdout_ms; });
  k.push_back({"fraction", "keep the most recent fraction of training sessions, e.g. 1/64",
               [](RunConfig& c, const std::string& v) {
                 try {
                   c.preprocess.fraction = Fraction::parse(v);
                 } catch (const DataError& e) {
                   throw ConfigError(std::string("fraction: ") + e.what());
                 }
               },
               [](const RunConfig& c) { return c.preprocess.fraction.str(); }});
  bool_key("filter-test-items", "drop test clicks on items unseen in training",
           [](RunConfig& c) -> bool& { return c.preprocess.filter_test_items; });
  size_key("max-len", "longest prefix kept by sequence splitting",
           [](RunConfig& c) -> std::size_t& { return c.preprocess.max_len; });

  double_key("learning-rate", "Adam learning rate", [](RunConfig& c) -> double& { return c.train.learning_rate; });
  size_key("batch-size", "mini-batch size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
  size_key("epochs", "training epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs; });
  size_key("embedding-dim", "item embedding size", [](RunConfig& c) -> Index& { return c.train.embed_dim; });
  size_key("hidden-dim", "GRU hidden size", [](RunConfig& c) -> Index& { return c.train.hidden_dim; });
  size_key("truncation", "BPTT truncation (longest prefix)", [](RunConfig& c) -> Index& { return c.train.truncation; });
  double_key("dropout-embed", "dropout between embedding and GRU",
             [](RunConfig& c) -> double& { return c.train.dropout_embed; });
  double_key("dropout-repr", "dropout between representation and decoder",
             [](RunConfig& c) -> double& { return c.train.dropout_repr; });
  double_key("validation-fraction", "held-out share for model selection",
             [](RunConfig& c) -> double& { return c.train.validation_fraction; });
  size_key("seed", "random seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; });
  k.push_back({"variant", "hybrid, global or local",
               [](RunConfig& c, const std::string& v) {
                 try {
                   c.train.variant = parse_variant(v);
                 } catch (const std::invalid_argument& e) {
                   throw ConfigError(e.what());
                 }
               },
               [](const RunConfig& c) { return std::string(to_string(c.train.variant)); }});
  bool_key("use-bias", "add bias terms", [](RunConfig& c) -> bool& { return c.train.use_bias; });
  bool_key("attention-softmax", "softmax-normalise attention weights",
           [](RunConfig& c) -> bool& { return c.train.attention_softmax; });
  double_key("clip-norm", "global gradient norm clip, 0 is off",
             [](RunConfig& c) -> double& { return c.train.clip_norm; });
  size_key("threads", "worker threads per batch", [](RunConfig& c) -> std::size_t& { return c.train.threads; });
  double_key("embed-init-bound", "embedding init bound", [](RunConfig& c) -> double& { return c.train.init.embed_bound; });

  string_key("baseline", "pop, spop or itemknn instead of a checkpoint", &RunConfig::baseline);
  double_key("knn-lambda", "Item-KNN regularisation", [](RunConfig& c) -> double& { return c.knn_lambda; });
  bool_key("knn-exclude-self", "never recommend the last clicked item",
           [](RunConfig& c) -> bool& { return c.knn_exclude_self; });
  size_key("k", "cut-off for Recall@k and MRR@k", [](RunConfig& c) -> std::size_t& { return c.k; });
  string_key("per-length-out", "file in out-dir receiving the per-length table", &RunConfig::per_length_out);
  string_key("items", "comma-separated item ids (predict)", &RunConfig::items);
  return k;
}

std::filesystem::path or_default(const std::filesystem::path& p, const std::filesystem::path& dir,
                                 const char* name) {
  return p.empty() ? dir / name : p;
}

}  // namespace

std::filesystem::path RunConfig::resolve_train_examples() const { return or_default(train_examples, out_dir, "train.tsv"); }
std::filesystem::path RunConfig::resolve_test_examples() const { return or_default(test_examples, out_dir, "test.tsv"); }
std::filesystem::path RunConfig::resolve_vocab() const { return or_default(vocab, out_dir, "vocab.tsv"); }
std::filesystem::path RunConfig::resolve_train_sessions() const {
  return or_default(train_sessions, out_dir, "train_sessions.tsv");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void apply_key(RunConfig& config, const std::string& key, const std::string& value) {
  std::string name = key;
  std::replace(name.begin(), name.end(), '_', '-');
  const auto& keys = config_keys();
  const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == name; });
  if (it == keys.end()) throw ConfigError("unknown config key '" + key + "'");
  it->set(config, value);
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    const std::string text = trim(std::string_view(line).substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == text.npos) {
      throw ConfigError(path.string() + ":" + std::to_string(row) + ": expected key=value");
    }
    apply_key(config, trim(std::string_view(text).substr(0, eq)), trim(std::string_view(text).substr(eq + 1)));
  }
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + "=" + k.get(config) + "\n";
  return out;
}

}  // namespace narm::cli
