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

// Synthetic click streams for tests: a fixed first-order Markov chain over
// items, optionally with a "purpose" label tied to a random earlier item.

#include <narm/dataset.hpp>
#include <narm/numerics.hpp>

#include <filesystem>
#include <vector>

namespace narm::testing {

struct MarkovChain {
  MatX transition;  // row a = P(next | current a), items 0-based
  VecX initial;

  std::size_t n_items() const { return static_cast<std::size_t>(initial.size()); }
};

/// Rows are softmax(sharpness * N(0, 1)) over all items.
MarkovChain make_markov_chain(std::size_t n_items, double sharpness, RngState& rng);

std::size_t sample_categorical(const VecX& probs, RngState& rng);

struct SyntheticOptions {
  std::size_t n_sessions = 10'000;
  std::size_t min_len = 4;
  std::size_t max_len = 10;
  std::int64_t span_ms = 10LL * 86'400'000;  // session starts spread over this window
  /// When set, the last click follows purpose[anchor] for an anchor chosen
  /// uniformly among the earlier clicks.
  const MarkovChain* purpose = nullptr;
};

/// Item ids are "i<k>" for 0-based item k; session ids "s<n>".
std::vector<ClickEvent> sample_clicks(const MarkovChain& chain, const SyntheticOptions& options, RngState& rng);

void write_clicks_csv(const std::filesystem::path& path, const std::vector<ClickEvent>& events);

/// 0-based chain item behind a vocab index.
std::size_t chain_item(const ItemVocab& vocab, ItemIndex index);

/// Bayes-optimal scores for a plain chain: the transition row of the last
/// item, laid out in vocab order.
VecX bayes_scores(const MarkovChain& chain, const ItemVocab& vocab, std::span<const ItemIndex> prefix);

}  // namespace narm::testing
