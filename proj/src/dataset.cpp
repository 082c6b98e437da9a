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

#include <narm/dataset.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace narm {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    std::string_view field = line.substr(start, pos == std::string_view::npos ? line.npos : pos - start);
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
      field = field.substr(1, field.size() - 2);
    }
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

SessionCorpus drop_short(SessionCorpus corpus, std::size_t min_len) {
  std::erase_if(corpus.sessions, [&](const Session& s) { return s.items.size() < min_len; });
  return corpus;
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  std::int64_t value = 0;
  if (parse_int(text, value)) {
    if (value < 0) return std::nullopt;
    return value;
  }
  // ISO-8601 subset.
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int year = 0;
  unsigned month = 0, day = 0;
  if (!parse_int(text.substr(0, 4), year) || !parse_int(text.substr(5, 2), month) ||
      !parse_int(text.substr(8, 2), day) || month < 1 || month > 12 || day < 1 || day > 31) {
    return std::nullopt;
  }
  std::int64_t ms = days_from_civil(year, month, day) * 86'400'000;
  std::string_view rest = text.substr(10);
  if (!rest.empty()) {
    if ((rest[0] != 'T' && rest[0] != ' ') || rest.size() < 9 || rest[3] != ':' || rest[6] != ':') {
      return std::nullopt;
    }
    unsigned hh = 0, mm = 0, ss = 0;
    if (!parse_int(rest.substr(1, 2), hh) || !parse_int(rest.substr(4, 2), mm) ||
        !parse_int(rest.substr(7, 2), ss) || hh > 23 || mm > 59 || ss > 60) {
      return std::nullopt;
    }
    ms += (hh * 3600 + mm * 60 + ss) * 1000LL;
    rest = rest.substr(9);
    if (!rest.empty() && rest[0] == '.') {
      std::size_t n = 1;
      while (n < rest.size() && rest[n] >= '0' && rest[n] <= '9') ++n;
      if (n == 1) return std::nullopt;
      std::string frac(rest.substr(1, n - 1));
      frac.resize(3, '0');
      ms += std::stoi(frac.substr(0, 3));
      rest = rest.substr(n);
    }
    if (rest == "Z") rest = {};
  }
  if (!rest.empty() || ms < 0) return std::nullopt;
  return ms;
}

LoadResult load_clicks(const std::filesystem::path& path, const ClickSchema& schema) {
  if (!std::filesystem::exists(path)) throw DataError("input file not found: '" + path.string() + "'");
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("missing header row in '" + path.string() + "'");
  const auto header = split_fields(strip_cr(line), schema.delimiter);
  const auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError("header of '" + path.string() + "' has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_session = column(schema.session_column);
  const std::size_t c_time = column(schema.timestamp_column);
  const std::size_t c_item = column(schema.item_column);

  LoadResult result;
  while (std::getline(in, line)) {
    const std::string_view row = strip_cr(line);
    if (row.empty()) continue;
    ++result.rows;
    const auto fields = split_fields(row, schema.delimiter);
    if (fields.size() != header.size()) {
      ++result.malformed;
      continue;
    }
    const auto ts = parse_timestamp(fields[c_time]);
    if (!ts || fields[c_session].empty() || fields[c_item].empty()) {
      ++result.malformed;
      continue;
    }
    result.events.push_back({std::string(fields[c_session]), *ts, std::string(fields[c_item])});
  }
  if (result.rows > 0 &&
      static_cast<double>(result.malformed) > schema.max_malformed_fraction * static_cast<double>(result.rows)) {
    throw DataError(std::to_string(result.malformed) + " of " + std::to_string(result.rows) +
                    " rows malformed in '" + path.string() + "'");
  }
  return result;
}

std::size_t SessionCorpus::click_count() const {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.items.size();
  return n;
}

std::int64_t SessionCorpus::last_timestamp() const {
  std::int64_t t = 0;
  for (const auto& s : sessions) t = std::max(t, s.end);
  return t;
}

SessionCorpus build_sessions(std::span<const ClickEvent> events) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<const ClickEvent*>> groups;
  for (const auto& e : events) {
    const auto [it, inserted] = slot.try_emplace(e.session_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(&e);
  }
  SessionCorpus corpus;
  corpus.sessions.reserve(groups.size());
  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(),
                     [](const ClickEvent* a, const ClickEvent* b) { return a->timestamp < b->timestamp; });
    Session s{g.front()->session_id, g.front()->timestamp, g.back()->timestamp, {}};
    s.items.reserve(g.size());
    for (const auto* e : g) s.items.push_back(e->item_id);
    corpus.sessions.push_back(std::move(s));
  }
  std::stable_sort(corpus.sessions.begin(), corpus.sessions.end(),
                   [](const Session& a, const Session& b) { return a.start < b.start; });
  return corpus;
}

ItemIndex ItemVocab::add(const std::string& id) {
  const auto [it, inserted] = index_.try_emplace(id, static_cast<ItemIndex>(ids_.size()));
  if (inserted) ids_.push_back(id);
  return it->second;
}

std::optional<ItemIndex> ItemVocab::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ItemIndex ItemVocab::index_of(std::string_view id) const {
  const auto found = find(id);
  if (!found) throw DataError("unknown item id '" + std::string(id) + "'");
  return *found;
}

const std::string& ItemVocab::id_of(ItemIndex index) const {
  if (index < 1 || static_cast<std::size_t>(index) >= ids_.size()) {
    throw DataError("item index " + std::to_string(index) + " not in vocabulary");
  }
  return ids_[index];
}

ItemVocab ItemVocab::build(const SessionCorpus& corpus) {
  ItemVocab vocab;
  for (const auto& s : corpus.sessions) {
    for (const auto& item : s.items) vocab.add(item);
  }
  return vocab;
}

void ItemVocab::save(const std::filesystem::path& path) const {
  auto out = open_output(path);
  out << "item_id\tindex\n";
  for (std::size_t i = 1; i < ids_.size(); ++i) out << ids_[i] << '\t' << i << '\n';
}

ItemVocab ItemVocab::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  std::getline(in, line);
  ItemVocab vocab;
  while (std::getline(in, line)) {
    const std::string_view row = strip_cr(line);
    if (row.empty()) continue;
    const auto tab = row.rfind('\t');
    ItemIndex index = 0;
    if (tab == row.npos || !parse_int(row.substr(tab + 1), index)) {
      throw DataError("malformed vocab row in '" + path.string() + "'");
    }
    if (vocab.add(std::string(row.substr(0, tab))) != index) {
      throw DataError("vocab indices in '" + path.string() + "' are not contiguous from 1");
    }
  }
  return vocab;
}

FilteredCorpus filter_corpus(const SessionCorpus& corpus, const FilterOptions& options) {
  if (corpus.empty()) throw DataError("filter_corpus: empty corpus");
  SessionCorpus current = corpus;
  for (;;) {
    std::unordered_map<std::string, std::size_t> support;
    for (const auto& s : current.sessions) {
      for (const auto& item : s.items) ++support[item];
    }
    std::size_t removed = 0;
    for (auto& s : current.sessions) {
      const std::size_t before = s.items.size();
      std::erase_if(s.items, [&](const std::string& item) { return support[item] < options.min_item_support; });
      removed += before - s.items.size();
    }
    const std::size_t sessions_before = current.size();
    current = drop_short(std::move(current), options.min_session_len);
    if (!options.fixpoint || (removed == 0 && current.size() == sessions_before)) break;
  }
  if (current.empty()) throw DataError("filter_corpus: every session was eliminated");
  FilteredCorpus out{std::move(current), {}};
  out.vocab = ItemVocab::build(out.corpus);
  return out;
}

TemporalSplit temporal_split(const SessionCorpus& corpus, std::int64_t holdout_ms) {
  if (holdout_ms <= 0) throw DataError("temporal_split: holdout must be positive");
  const std::int64_t threshold = corpus.last_timestamp() - holdout_ms;
  TemporalSplit split;
  for (const auto& s : corpus.sessions) (s.start > threshold ? split.test : split.train).sessions.push_back(s);
  if (split.test.empty()) throw DataError("temporal_split: holdout window contains no sessions");
  if (split.train.empty()) throw DataError("temporal_split: holdout window covers every session");
  return split;
}

SessionCorpus filter_test_items(const SessionCorpus& test, const ItemVocab& train_vocab,
                                std::size_t min_session_len) {
  SessionCorpus out = test;
  for (auto& s : out.sessions) {
    std::erase_if(s.items, [&](const std::string& item) { return !train_vocab.contains(item); });
  }
  return drop_short(std::move(out), min_session_len);
}

Fraction Fraction::parse(std::string_view text) {
  Fraction f;
  const auto slash = text.find('/');
  bool ok = false;
  if (slash == text.npos) {
    ok = parse_int(text, f.num);
    f.den = 1;
  } else {
    ok = parse_int(text.substr(0, slash), f.num) && parse_int(text.substr(slash + 1), f.den);
  }
  if (!ok || f.num <= 0 || f.den <= 0 || f.num > f.den) {
    throw DataError("fraction must be a rational in (0, 1], got '" + std::string(text) + "'");
  }
  return f;
}

SessionCorpus take_recent_fraction(const SessionCorpus& train, Fraction fraction) {
  if (fraction.num <= 0 || fraction.den <= 0 || fraction.num > fraction.den) {
    throw DataError("take_recent_fraction: fraction must lie in (0, 1]");
  }
  SessionCorpus sorted = train;
  std::stable_sort(sorted.sessions.begin(), sorted.sessions.end(),
                   [](const Session& a, const Session& b) { return a.start < b.start; });
  const auto n = static_cast<std::int64_t>(sorted.size());
  const auto keep = static_cast<std::size_t>((n * fraction.num + fraction.den - 1) / fraction.den);
  sorted.sessions.erase(sorted.sessions.begin(), sorted.sessions.end() - static_cast<std::ptrdiff_t>(keep));
  return sorted;
}

ExampleSet split_sequences(const SessionCorpus& corpus, const ItemVocab& vocab, std::size_t max_len) {
  if (max_len < 1) throw DataError("split_sequences: max_len must be >= 1");
  ExampleSet out;
  Prefix indices;
  for (const auto& s : corpus.sessions) {
    if (s.items.size() < 2) throw DataError("split_sequences: session '" + s.id + "' is shorter than 2");
    indices.clear();
    for (const auto& item : s.items) indices.push_back(vocab.index_of(item));
    for (std::size_t n = 1; n < indices.size(); ++n) {
      const std::size_t begin = n > max_len ? n - max_len : 0;
      out.push_back({Prefix(indices.begin() + static_cast<std::ptrdiff_t>(begin),
                            indices.begin() + static_cast<std::ptrdiff_t>(n)),
                     indices[n], s.id});
    }
  }
  return out;
}

void write_examples(const std::filesystem::path& path, const ExampleSet& examples) {
  auto out = open_output(path);
  out << "prefix\tlabel\n";
  for (const auto& e : examples) {
    for (std::size_t i = 0; i < e.prefix.size(); ++i) out << (i ? " " : "") << e.prefix[i];
    out << '\t' << e.label << '\n';
  }
}

ExampleSet read_examples(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("example file not found: '" + path.string() + "'");
  auto in = open_input(path);
  std::string line;
  std::getline(in, line);
  ExampleSet out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view text = strip_cr(line);
    if (text.empty()) continue;
    const auto tab = text.find('\t');
    Example e;
    bool ok = tab != text.npos && parse_int(text.substr(tab + 1), e.label);
    for (const auto field : split_fields(text.substr(0, tab), ' ')) {
      ItemIndex idx = 0;
      ok = ok && parse_int(field, idx);
      e.prefix.push_back(idx);
    }
    if (!ok || e.prefix.empty()) {
      throw DataError("malformed example at line " + std::to_string(row) + " of '" + path.string() + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_index_sessions(const std::filesystem::path& path, const SessionCorpus& corpus,
                          const ItemVocab& vocab) {
  auto out = open_output(path);
  out << "session_id\titems\n";
  for (const auto& s : corpus.sessions) {
    out << s.id << '\t';
    for (std::size_t i = 0; i < s.items.size(); ++i) out << (i ? " " : "") << vocab.index_of(s.items[i]);
    out << '\n';
  }
}

std::vector<Prefix> read_index_sessions(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("session file not found: '" + path.string() + "'");
  auto in = open_input(path);
  std::string line;
  std::getline(in, line);
  std::vector<Prefix> out;
  while (std::getline(in, line)) {
    const std::string_view text = strip_cr(line);
    if (text.empty()) continue;
    const auto tab = text.find('\t');
    if (tab == text.npos) throw DataError("malformed session row in '" + path.string() + "'");
    Prefix seq;
    for (const auto field : split_fields(text.substr(tab + 1), ' ')) {
      ItemIndex idx = 0;
      if (!parse_int(field, idx)) throw DataError("malformed session row in '" + path.string() + "'");
      seq.push_back(idx);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

PreprocessResult preprocess_events(std::span<const ClickEvent> events, const PreprocessConfig& config) {
  const SessionCorpus sessions = build_sessions(events);
  auto filtered = filter_corpus(sessions, config.filter);
  auto split = temporal_split(filtered.corpus, config.holdout_ms);

  PreprocessResult r;
  r.train = take_recent_fraction(split.train, config.fraction);
  if (config.filter_test_items) {
    r.vocab = ItemVocab::build(r.train);
    r.test = filter_test_items(split.test, r.vocab);
  } else {
    r.vocab = std::move(filtered.vocab);
    r.test = std::move(split.test);
  }
  if (r.test.empty()) throw DataError("preprocess: no test sessions survive filtering");
  r.train_examples = split_sequences(r.train, r.vocab, config.max_len);
  r.test_examples = split_sequences(r.test, r.vocab, config.max_len);

  r.stats.clicks = r.train.click_count() + r.test.click_count();
  r.stats.train_sessions = r.train.size();
  r.stats.test_sessions = r.test.size();
  r.stats.items = r.vocab.size();
  r.stats.avg_length = static_cast<double>(r.stats.clicks) /
                       static_cast<double>(r.stats.train_sessions + r.stats.test_sessions);
  return r;
}

PreprocessResult preprocess(const std::filesystem::path& clicks, const PreprocessConfig& config) {
  const LoadResult loaded = load_clicks(clicks, config.schema);
  auto r = preprocess_events(loaded.events, config);
  r.malformed_rows = loaded.malformed;
  return r;
}

void write_stats(const std::filesystem::path& path, const DatasetStats& stats) {
  auto out = open_output(path);
  out << "clicks\ttrain_sessions\ttest_sessions\titems\tavg_length\n"
      << stats.clicks << '\t' << stats.train_sessions << '\t' << stats.test_sessions << '\t' << stats.items
      << '\t' << std::fixed << std::setprecision(4) << stats.avg_length << '\n';
}

}  // namespace narm
