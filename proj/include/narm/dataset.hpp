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

#pragma once

#include <narm/types.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace narm {

/// Input or pipeline error (bad files, empty corpora, unknown items).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClickEvent {
  std::string session_id;
  std::int64_t timestamp = 0;  // milliseconds since epoch
  std::string item_id;

  friend bool operator==(const ClickEvent&, const ClickEvent&) = default;
};

/// Column mapping for a delimited click log with a header row.
struct ClickSchema {
  std::string session_column = "session";
  std::string timestamp_column = "ts";
  std::string item_column = "item";
  char delimiter = ',';
  /// Loading aborts when malformed rows exceed this fraction of data rows.
  double max_malformed_fraction = 0.1;
};

struct LoadResult {
  std::vector<ClickEvent> events;
  std::size_t rows = 0;
  std::size_t malformed = 0;
};

/// Parses integer milliseconds, or ISO-8601 "YYYY-MM-DD[THH:MM:SS[.fff]][Z]".
std::optional<std::int64_t> parse_timestamp(std::string_view text);

LoadResult load_clicks(const std::filesystem::path& path, const ClickSchema& schema = {});

struct Session {
  std::string id;
  std::int64_t start = 0;  // first click
  std::int64_t end = 0;    // last click
  std::vector<std::string> items;

  friend bool operator==(const Session&, const Session&) = default;
};

struct SessionCorpus {
  std::vector<Session> sessions;

  bool empty() const { return sessions.empty(); }
  std::size_t size() const { return sessions.size(); }
  std::size_t click_count() const;
  std::int64_t last_timestamp() const;

  friend bool operator==(const SessionCorpus&, const SessionCorpus&) = default;
};

/// Groups by session, sorts clicks by time (stable), orders sessions by start
/// time with first appearance breaking ties.
SessionCorpus build_sessions(std::span<const ClickEvent> events);

/// Bijection between item ids and 1..m. Index 0 is padding.
class ItemVocab {
 public:
  ItemVocab() : ids_(1) {}

  /// Returns the index of id, adding it if new.
  ItemIndex add(const std::string& id);
  std::optional<ItemIndex> find(std::string_view id) const;
  ItemIndex index_of(std::string_view id) const;
  const std::string& id_of(ItemIndex index) const;
  bool contains(std::string_view id) const { return find(id).has_value(); }
  /// m, the number of real items.
  std::size_t size() const { return ids_.size() - 1; }

  /// Indices assigned in order of first appearance.
  static ItemVocab build(const SessionCorpus& corpus);

  void save(const std::filesystem::path& path) const;
  static ItemVocab load(const std::filesystem::path& path);

  friend bool operator==(const ItemVocab& a, const ItemVocab& b) { return a.ids_ == b.ids_; }

 private:
  std::unordered_map<std::string, ItemIndex> index_;
  std::vector<std::string> ids_;
};

struct FilterOptions {
  std::size_t min_session_len = 2;
  std::size_t min_item_support = 5;
  /// Repeat both filters until nothing changes. Off: one pass, items first.
  bool fixpoint = false;
};

struct FilteredCorpus {
  SessionCorpus corpus;
  ItemVocab vocab;
};

FilteredCorpus filter_corpus(const SessionCorpus& corpus, const FilterOptions& options = {});

struct TemporalSplit {
  SessionCorpus train;
  SessionCorpus test;
};

/// Sessions starting after (last click - holdout) form the test set.
TemporalSplit temporal_split(const SessionCorpus& corpus, std::int64_t holdout_ms);

SessionCorpus filter_test_items(const SessionCorpus& test, const ItemVocab& train_vocab,
                                std::size_t min_session_len = 2);

/// Rational in (0, 1], e.g. 1/64.
struct Fraction {
  std::int64_t num = 1;
  std::int64_t den = 1;

  static Fraction parse(std::string_view text);
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

/// Keeps the ceil(fraction * n) most recent sessions, ascending by start time.
SessionCorpus take_recent_fraction(const SessionCorpus& train, Fraction fraction);

struct Example {
  Prefix prefix;
  ItemIndex label = 0;
  std::string session_id;  // empty when read back from disk

  friend bool operator==(const Example& a, const Example& b) {
    return a.prefix == b.prefix && a.label == b.label;
  }
};

using ExampleSet = std::vector<Example>;

/// Session [x1..xn] -> ([x1], x2), ..., ([x1..x_{n-1}], xn), each prefix cut
/// to its last max_len items.
ExampleSet split_sequences(const SessionCorpus& corpus, const ItemVocab& vocab, std::size_t max_len = 19);

/// One example per line: space-separated prefix, tab, label. Header "prefix\tlabel".
void write_examples(const std::filesystem::path& path, const ExampleSet& examples);
ExampleSet read_examples(const std::filesystem::path& path);

/// Index sequences of a corpus, one session per line: id, tab, indices.
void write_index_sessions(const std::filesystem::path& path, const SessionCorpus& corpus,
                          const ItemVocab& vocab);
std::vector<Prefix> read_index_sessions(const std::filesystem::path& path);

struct DatasetStats {
  std::size_t clicks = 0;
  std::size_t train_sessions = 0;
  std::size_t test_sessions = 0;
  std::size_t items = 0;
  double avg_length = 0.0;
};

struct PreprocessConfig {
  ClickSchema schema;
  FilterOptions filter;
  std::int64_t holdout_ms = 86'400'000;  // one day
  Fraction fraction;
  bool filter_test_items = true;
  std::size_t max_len = 19;
};

struct PreprocessResult {
  SessionCorpus train;
  SessionCorpus test;
  ItemVocab vocab;
  ExampleSet train_examples;
  ExampleSet test_examples;
  DatasetStats stats;
  std::size_t malformed_rows = 0;
};

/// load -> sessions -> filter -> temporal split -> recent fraction -> test
/// item filter -> sequence split. The vocab covers training items when test
/// items are filtered, otherwise all filtered items.
PreprocessResult preprocess(const std::filesystem::path& clicks, const PreprocessConfig& config);
PreprocessResult preprocess_events(std::span<const ClickEvent> events, const PreprocessConfig& config);

void write_stats(const std::filesystem::path& path, const DatasetStats& stats);

}  // namespace narm
