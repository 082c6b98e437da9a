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

#include "commands.hpp"

#include "run_config.hpp"

#include <narm/baselines.hpp>
#include <narm/checkpoint.hpp>
#include <narm/dataset.hpp>
#include <narm/evaluation.hpp>
#include <narm/gradcheck.hpp>
#include <narm/training.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace narm::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct KeyFlags {
  fs::path config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_run_config_flags(CLI::App& cmd, KeyFlags& flags) {
  cmd.add_option("--config", flags.config_file, "key=value config file (flags override it)");
  for (const auto& key : config_keys()) {
    flags.options[key.name] = cmd.add_option("--" + key.name, flags.values[key.name], key.help);
  }
}

RunConfig resolve(const KeyFlags& flags) {
  RunConfig config;
  if (!flags.config_file.empty()) apply_config_file(config, flags.config_file);
  for (const auto& key : config_keys()) {
    if (flags.options.at(key.name)->count() > 0) apply_key(config, key.name, flags.values.at(key.name));
  }
  return config;
}

fs::path prepare_out_dir(const RunConfig& config) {
  fs::create_directories(config.out_dir);
  return config.out_dir;
}

std::string checkpoint_name(std::size_t epoch) {
  std::ostringstream s;
  s << "checkpoint_epoch_" << std::setw(3) << std::setfill('0') << epoch << ".narm";
  return s.str();
}

fs::path resolve_checkpoint(const RunConfig& config) {
  if (!config.checkpoint.empty()) {
    if (!fs::exists(config.checkpoint)) throw CheckpointError("missing checkpoint '" + config.checkpoint.string() + "'");
    return config.checkpoint;
  }
  const fs::path pointer = config.out_dir / "best.txt";
  std::ifstream in(pointer);
  std::string header, row;
  if (!in || !std::getline(in, header) || !std::getline(in, row)) {
    throw CheckpointError("missing checkpoint: no --checkpoint given and '" + pointer.string() + "' not found");
  }
  std::istringstream fields(row);
  std::string epoch, name;
  fields >> epoch >> name;
  const fs::path path = config.out_dir / name;
  if (!fs::exists(path)) throw CheckpointError("missing checkpoint '" + path.string() + "'");
  return path;
}

ExampleSet truncate_prefixes(ExampleSet examples, std::size_t max_len) {
  for (auto& e : examples) {
    if (e.prefix.size() > max_len) e.prefix.erase(e.prefix.begin(), e.prefix.end() - static_cast<std::ptrdiff_t>(max_len));
  }
  return examples;
}

int cmd_preprocess(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (config.input.empty()) throw UsageError("preprocess: --input is required");
  const auto result = preprocess(config.input, config.preprocess);
  const fs::path dir = prepare_out_dir(config);
  write_examples(dir / "train.tsv", result.train_examples);
  write_examples(dir / "test.tsv", result.test_examples);
  result.vocab.save(dir / "vocab.tsv");
  write_index_sessions(dir / "train_sessions.tsv", result.train, result.vocab);
  write_stats(dir / "stats.tsv", result.stats);
  if (result.malformed_rows > 0) err << "skipped " << result.malformed_rows << " malformed rows\n";
  std::ifstream stats(dir / "stats.tsv");
  out << stats.rdbuf();
  out << "train_examples\t" << result.train_examples.size() << "\ntest_examples\t" << result.test_examples.size()
      << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  const auto vocab = ItemVocab::load(config.resolve_vocab());
  const auto examples =
      truncate_prefixes(read_examples(config.resolve_train_examples()), static_cast<std::size_t>(config.train.truncation));
  const fs::path dir = prepare_out_dir(config);
  const auto result = train(examples, static_cast<Index>(vocab.size()), config.train,
                            [&](const EpochLog& log, const Params& params) {
                              save_checkpoint(dir / checkpoint_name(log.epoch), params);
                            });
  write_train_log(dir / "train_log.tsv", result.log, config.train.eval_k);
  {
    std::ofstream pointer(dir / "best.txt", std::ios::binary);
    pointer << "epoch\tcheckpoint\tselection\n"
            << result.best_epoch << '\t' << checkpoint_name(result.best_epoch) << '\t'
            << (result.n_validation > 0 ? "val_recall@" + std::to_string(config.train.eval_k) : std::string("last_epoch"))
            << '\n';
  }
  const auto& best = result.log[result.best_epoch - 1];
  out << std::setprecision(17) << "best_epoch\tval_recall@" << config.train.eval_k << "\tval_mrr@"
      << config.train.eval_k << '\n'
      << result.best_epoch << '\t' << best.val_recall << '\t' << best.val_mrr << '\n';
  return kExitOk;
}

int cmd_evaluate(const RunConfig& config, std::ostream& out) {
  ExampleSet test = read_examples(config.resolve_test_examples());
  Scorer scorer;
  Params params;
  PopModel pop;
  ItemKnnModel knn;
  if (config.baseline.empty()) {
    params = load_checkpoint(resolve_checkpoint(config));
    test = truncate_prefixes(std::move(test), static_cast<std::size_t>(params.config.truncation));
    scorer = narm_scorer(params);
  } else {
    if (config.baseline != "pop" && config.baseline != "spop" && config.baseline != "itemknn") {
      throw UsageError("unknown baseline '" + config.baseline + "' (expected pop, spop or itemknn)");
    }
    const auto vocab = ItemVocab::load(config.resolve_vocab());
    const auto sessions = read_index_sessions(config.resolve_train_sessions());
    if (config.baseline == "itemknn") {
      knn = itemknn_train(sessions, vocab.size(), config.knn_lambda, config.knn_exclude_self);
      scorer = [&knn](std::span<const ItemIndex> p) { return itemknn_scores(knn, p); };
    } else {
      pop = PopModel::train(sessions, vocab.size());
      if (config.baseline == "pop") {
        scorer = [&pop](std::span<const ItemIndex> p) { return pop_scores(pop, p); };
      } else {
        scorer = [&pop](std::span<const ItemIndex> p) { return spop_scores(pop, p); };
      }
    }
  }
  const auto report = evaluate(scorer, test, config.k);
  const fs::path dir = prepare_out_dir(config);
  write_report(dir / "eval_report.tsv", report);
  if (!config.per_length_out.empty()) {
    std::ofstream table(dir / fs::path(config.per_length_out).filename(), std::ios::binary);
    table << std::setprecision(17) << "length\tn_cases\trecall@" << report.k << "\tmrr@" << report.k << '\n';
    for (const auto& [len, b] : report.per_length) table << len << '\t' << b.n_cases << '\t' << b.recall << '\t' << b.mrr << '\n';
  }
  out << format_report(report);
  return kExitOk;
}

int cmd_predict(const RunConfig& config, std::ostream& out) {
  const Params params = load_checkpoint(resolve_checkpoint(config));
  const auto vocab = ItemVocab::load(config.resolve_vocab());
  if (static_cast<Index>(vocab.size()) != params.config.n_items) {
    throw UsageError("vocabulary size does not match the checkpoint item count");
  }
  Prefix prefix;
  std::istringstream ids(config.items);
  std::string id;
  while (std::getline(ids, id, ',')) {
    if (id.empty()) continue;
    const auto idx = vocab.find(id);
    if (!idx) throw UsageError("unknown item id '" + id + "'");
    prefix.push_back(*idx);
  }
  if (prefix.empty()) throw UsageError("predict: --items needs at least one item id");
  const auto max_len = static_cast<std::size_t>(params.config.truncation);
  if (prefix.size() > max_len) prefix.erase(prefix.begin(), prefix.end() - static_cast<std::ptrdiff_t>(max_len));
  auto enc = encode(params, std::span<const ItemIndex>(prefix));
  session_representation(params, enc);
  const auto pred = decode(params, enc.c);
  out << std::setprecision(17) << "item_id\tprobability\n";
  for (ItemIndex i : top_k(pred.scores, config.k)) out << vocab.id_of(i) << '\t' << pred.probs[i - 1] << '\n';
  return kExitOk;
}

int cmd_export_attention(const RunConfig& config, std::ostream& out) {
  const Params params = load_checkpoint(resolve_checkpoint(config));
  const auto vocab = ItemVocab::load(config.resolve_vocab());
  const auto test = truncate_prefixes(read_examples(config.resolve_test_examples()),
                                      static_cast<std::size_t>(params.config.truncation));
  const fs::path dir = prepare_out_dir(config);
  const std::size_t n = export_attention(params, test, vocab, dir / "attention.jsonl", config.k);
  out << "traces\t" << n << '\n';
  return kExitOk;
}

struct GradcheckFlags {
  GradcheckOptions options;
  std::string variant = "hybrid";
};

int cmd_gradcheck(const GradcheckFlags& flags, std::ostream& out) {
  GradcheckOptions options = flags.options;
  options.model.variant = parse_variant(flags.variant);
  const auto report = run_gradcheck(options);
  out << std::setprecision(6) << std::scientific << "block\tmax_rel_error\n";
  for (const auto& b : report.blocks) out << b.name << '\t' << b.max_rel_error << '\n';
  out << "max\t" << report.max_rel_error << '\n' << (report.passed ? "PASS" : "FAIL") << '\n';
  return report.passed ? kExitOk : kExitFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Session-based next-item recommendation with an attentive GRU encoder"};
  app.require_subcommand(1);

  KeyFlags flags_pre, flags_train, flags_eval, flags_predict, flags_export;
  auto* pre = app.add_subcommand("preprocess", "build train/test examples from a click log");
  add_run_config_flags(*pre, flags_pre);
  auto* trn = app.add_subcommand("train", "train the model and select the best epoch");
  add_run_config_flags(*trn, flags_train);
  auto* evl = app.add_subcommand("evaluate", "Recall@k / MRR@k of a checkpoint or baseline");
  add_run_config_flags(*evl, flags_eval);
  auto* prd = app.add_subcommand("predict", "top-k next items for a prefix");
  add_run_config_flags(*prd, flags_predict);
  auto* exp = app.add_subcommand("export-attention", "write attention weights as JSON lines");
  add_run_config_flags(*exp, flags_export);

  GradcheckFlags gc;
  auto* grd = app.add_subcommand("gradcheck", "compare BPTT gradients with finite differences");
  grd->add_option("--n-items", gc.options.model.n_items, "number of items m");
  grd->add_option("--embedding-dim", gc.options.model.embed_dim, "embedding size D");
  grd->add_option("--hidden-dim", gc.options.model.hidden_dim, "hidden size H");
  grd->add_option("--length", gc.options.prefix_length, "prefix length");
  grd->add_option("--seeds", gc.options.seeds, "number of random parameter points");
  grd->add_option("--first-seed", gc.options.first_seed, "first seed");
  grd->add_option("--eps", gc.options.eps, "finite-difference step");
  grd->add_option("--tolerance", gc.options.tolerance, "maximum relative error");
  grd->add_option("--scale-floor", gc.options.scale_floor, "floor of the relative-error denominator");
  grd->add_option("--variant", gc.variant, "hybrid, global or local");
  grd->add_flag("--use-bias", gc.options.model.use_bias, "include bias terms");
  grd->add_flag("--attention-softmax", gc.options.model.attention_softmax, "softmax attention weights");
  grd->add_flag("--dropout", gc.options.with_dropout, "check with fixed dropout masks");
  grd->add_flag("--corrupt", gc.options.corrupt, "perturb one analytic gradient (harness self-test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*pre) return cmd_preprocess(resolve(flags_pre), out, err);
    if (*trn) return cmd_train(resolve(flags_train), out);
    if (*evl) return cmd_evaluate(resolve(flags_eval), out);
    if (*prd) return cmd_predict(resolve(flags_predict), out);
    if (*exp) return cmd_export_attention(resolve(flags_export), out);
    if (*grd) return cmd_gradcheck(gc, out);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace narm::cli
