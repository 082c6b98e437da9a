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

#include <narm/dataset.hpp>
#include <narm/model.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace narm {

/// Maps a prefix to one score per item; position i - 1 holds item i.
using Scorer = std::function<VecX(std::span<const ItemIndex>)>;

/// 1-based rank of label; ties go to the smaller item index.
std::size_t rank_of(const VecX& scores, ItemIndex label);

/// The k best items, best first, under the same ordering as rank_of.
std::vector<ItemIndex> top_k(const VecX& scores, std::size_t k);

/// Reduced non-negative fraction.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den)); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Counts of ranks 1..k plus the number of cases. Exact to merge.
struct RankHistogram {
  std::size_t k = 20;
  std::size_t n_cases = 0;
  std::vector<std::size_t> counts;  // counts[r] for r in 1..k, index 0 unused

  explicit RankHistogram(std::size_t k = 20) : k(k), counts(k + 1, 0) {}

  void add(std::size_t rank);
  void merge(const RankHistogram& other);
  std::size_t hits() const;
  double recall() const;
  double mrr() const;
  Rational recall_exact() const;
  /// Throws std::overflow_error when the reduced fraction exceeds 64 bits.
  Rational mrr_exact() const;

  friend bool operator==(const RankHistogram&, const RankHistogram&) = default;
};

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k = 20);
double mrr_at_k(std::span<const std::size_t> ranks, std::size_t k = 20);

struct LengthBreakdown {
  std::size_t n_cases = 0;
  double recall = 0.0;
  double mrr = 0.0;
};

struct EvalReport {
  std::size_t k = 20;
  std::size_t n_cases = 0;
  double recall = 0.0;
  double mrr = 0.0;
  std::map<std::size_t, LengthBreakdown> per_length;

  RankHistogram overall{20};
  std::map<std::size_t, RankHistogram> length_histograms;

  /// Recomputes the summary fields from the histograms.
  void finalize();
  /// Case-weighted merge of a report over a disjoint example set.
  void merge(const EvalReport& other);

  friend bool operator==(const EvalReport& a, const EvalReport& b) {
    return a.overall == b.overall && a.length_histograms == b.length_histograms;
  }
};

/// Scores every example, records its rank and aggregates overall and by
/// prefix length.
EvalReport evaluate(const Scorer& scorer, const ExampleSet& examples, std::size_t k = 20);

/// Eval-mode NARM scorer bound to params (held by reference).
Scorer narm_scorer(const Params& params);

void write_report(const std::filesystem::path& path, const EvalReport& report);
std::string format_report(const EvalReport& report);

struct AttentionTrace {
  std::string session_id;
  std::vector<std::string> items;
  std::vector<double> weights;
  std::vector<std::string> topk;
  std::string label;
};

AttentionTrace trace_attention(const Params& params, const Example& example, const ItemVocab& vocab,
                               std::size_t k = 20);

/// One JSON object per line: session_id, items, weights, topk, label. Examples
/// without a session id are keyed by their row number.
std::size_t export_attention(const Params& params, const ExampleSet& examples, const ItemVocab& vocab,
                             const std::filesystem::path& path, std::size_t k = 20);

}  // namespace narm
