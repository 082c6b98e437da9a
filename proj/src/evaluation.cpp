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

#include <narm/evaluation.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace narm {

namespace {

void check_label(const VecX& scores, ItemIndex label) {
  if (label < 1 || label > scores.size()) {
    throw std::out_of_range("rank_of: label " + std::to_string(label) + " outside 1.." +
                            std::to_string(scores.size()));
  }
}

void check_k(std::size_t k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
}

}  // namespace

std::size_t rank_of(const VecX& scores, ItemIndex label) {
  check_label(scores, label);
  const double target = scores[label - 1];
  std::size_t rank = 1;
  for (Index i = 0; i < scores.size(); ++i) {
    if (scores[i] > target || (scores[i] == target && i < label - 1)) ++rank;
  }
  return rank;
}

std::vector<ItemIndex> top_k(const VecX& scores, std::size_t k) {
  std::vector<ItemIndex> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 1);
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](ItemIndex a, ItemIndex b) {
                      const double sa = scores[a - 1], sb = scores[b - 1];
                      return sa > sb || (sa == sb && a < b);
                    });
  order.resize(k);
  return order;
}

void RankHistogram::add(std::size_t rank) {
  if (rank < 1) throw std::invalid_argument("rank must be >= 1");
  ++n_cases;
  if (rank <= k) ++counts[rank];
}

void RankHistogram::merge(const RankHistogram& other) {
  if (other.k != k) throw std::invalid_argument("RankHistogram::merge: different k");
  n_cases += other.n_cases;
  for (std::size_t r = 1; r <= k; ++r) counts[r] += other.counts[r];
}

std::size_t RankHistogram::hits() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

double RankHistogram::recall() const {
  if (n_cases == 0) return 0.0;
  return static_cast<double>(hits()) / static_cast<double>(n_cases);
}

Rational RankHistogram::recall_exact() const {
  if (n_cases == 0) return {};
  const std::uint64_t h = hits(), n = n_cases;
  const std::uint64_t g = std::gcd(h, n);
  return {h / g, n / g};
}

Rational RankHistogram::mrr_exact() const {
  if (n_cases == 0) return {};
  using u128 = unsigned __int128;
  const auto gcd128 = [](u128 a, u128 b) {
    while (b != 0) {
      const u128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  };
  // sum_r counts[r] / r accumulated as an exact fraction, then divided by n.
  u128 num = 0, den = 1;
  for (std::size_t r = 1; r <= k; ++r) {
    if (counts[r] == 0) continue;
    const u128 add_num = counts[r], add_den = r;
    const u128 g = gcd128(den, add_den);
    const u128 lcm = den / g * add_den;
    if (lcm / add_den != den / g) throw std::overflow_error("mrr_exact: denominator overflow");
    num = num * (lcm / den) + add_num * (lcm / add_den);
    den = lcm;
    const u128 rg = gcd128(num, den);
    num /= rg;
    den /= rg;
  }
  den *= n_cases;
  const u128 g = gcd128(num, den);
  num /= g;
  den /= g;
  constexpr u128 kMax = ~std::uint64_t{0};
  if (num > kMax || den > kMax) throw std::overflow_error("mrr_exact: result exceeds 64 bits");
  return {static_cast<std::uint64_t>(num), static_cast<std::uint64_t>(den)};
}

double RankHistogram::mrr() const {
  if (n_cases == 0) return 0.0;
  try {
    return mrr_exact().value();
  } catch (const std::overflow_error&) {
    double sum = 0.0;
    for (std::size_t r = 1; r <= k; ++r) sum += static_cast<double>(counts[r]) / static_cast<double>(r);
    return sum / static_cast<double>(n_cases);
  }
}

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  check_k(k);
  if (ranks.empty()) throw std::invalid_argument("recall_at_k: empty rank list");
  RankHistogram h(k);
  for (std::size_t r : ranks) h.add(r);
  return h.recall();
}

double mrr_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  check_k(k);
  if (ranks.empty()) throw std::invalid_argument("mrr_at_k: empty rank list");
  RankHistogram h(k);
  for (std::size_t r : ranks) h.add(r);
  return h.mrr();
}

void EvalReport::finalize() {
  n_cases = overall.n_cases;
  recall = overall.recall();
  mrr = overall.mrr();
  per_length.clear();
  for (const auto& [len, h] : length_histograms) per_length[len] = {h.n_cases, h.recall(), h.mrr()};
}

void EvalReport::merge(const EvalReport& other) {
  if (other.k != k) throw std::invalid_argument("EvalReport::merge: different k");
  overall.merge(other.overall);
  for (const auto& [len, h] : other.length_histograms) {
    auto [it, inserted] = length_histograms.try_emplace(len, k);
    it->second.merge(h);
  }
  finalize();
}

EvalReport evaluate(const Scorer& scorer, const ExampleSet& examples, std::size_t k) {
  check_k(k);
  EvalReport report;
  report.k = k;
  report.overall = RankHistogram(k);
  for (const auto& e : examples) {
    const VecX scores = scorer(e.prefix);
    const std::size_t rank = rank_of(scores, e.label);
    report.overall.add(rank);
    report.length_histograms.try_emplace(e.prefix.size(), k).first->second.add(rank);
  }
  report.finalize();
  return report;
}

Scorer narm_scorer(const Params& params) {
  return [&params](std::span<const ItemIndex> prefix) { return score_items(params, prefix); };
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "k\tn_cases\trecall\tmrr\n"
      << report.k << '\t' << report.n_cases << '\t' << report.recall << '\t' << report.mrr << '\n';
  out << "length\tn_cases\trecall\tmrr\n";
  for (const auto& [len, b] : report.per_length) {
    out << len << '\t' << b.n_cases << '\t' << b.recall << '\t' << b.mrr << '\n';
  }
  return out.str();
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << format_report(report);
}

AttentionTrace trace_attention(const Params& params, const Example& example, const ItemVocab& vocab,
                               std::size_t k) {
  auto enc = encode(params, std::span<const ItemIndex>(example.prefix));
  session_representation(params, enc);
  const auto pred = decode(params, enc.c);
  AttentionTrace trace;
  trace.session_id = example.session_id;
  for (ItemIndex i : example.prefix) trace.items.push_back(vocab.id_of(i));
  trace.weights.assign(enc.attention_weights.data(), enc.attention_weights.data() + enc.attention_weights.size());
  for (ItemIndex i : top_k(pred.scores, k)) trace.topk.push_back(vocab.id_of(i));
  trace.label = vocab.id_of(example.label);
  return trace;
}

std::size_t export_attention(const Params& params, const ExampleSet& examples, const ItemVocab& vocab,
                             const std::filesystem::path& path, std::size_t k) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  std::size_t written = 0;
  for (std::size_t row = 0; row < examples.size(); ++row) {
    auto trace = trace_attention(params, examples[row], vocab, k);
    if (trace.session_id.empty()) trace.session_id = std::to_string(row);
    nlohmann::json j;
    j["session_id"] = trace.session_id;
    j["items"] = trace.items;
    j["weights"] = trace.weights;
    j["topk"] = trace.topk;
    j["label"] = trace.label;
    out << j.dump() << '\n';
    ++written;
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
  return written;
}

}  // namespace narm
