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
#include <narm/numerics.hpp>

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace narm {

/// Sessions as index sequences over items 1..m.
using IndexSessions = std::vector<Prefix>;

IndexSessions to_index_sessions(const SessionCorpus& corpus, const ItemVocab& vocab);

/// Global click counts; counts[i - 1] belongs to item i.
struct PopModel {
  VecX counts;

  std::size_t n_items() const { return static_cast<std::size_t>(counts.size()); }
  double total() const { return counts.sum(); }

  static PopModel train(const IndexSessions& sessions, std::size_t n_items);

  void save(const std::filesystem::path& path) const;
  static PopModel load(const std::filesystem::path& path);
};

VecX pop_scores(const PopModel& model, std::span<const ItemIndex> prefix);

/// Lexicographic (count within prefix, global count), encoded as
/// within * (total + 1) + global / (total + 1).
VecX spop_scores(const PopModel& model, std::span<const ItemIndex> prefix);

struct ItemKnnModel {
  std::vector<std::uint32_t> support;  // sessions containing item i, at i - 1
  /// Per item, sorted (neighbour, co-occurrence) pairs; symmetric.
  std::vector<std::vector<std::pair<ItemIndex, std::uint32_t>>> cooccurrence;
  double lambda = 20.0;
  bool exclude_self = true;

  std::size_t n_items() const { return support.size(); }
  std::uint32_t co(ItemIndex a, ItemIndex b) const;
  /// co(a, b) / (sqrt(supp(a) * supp(b)) + lambda).
  double similarity(ItemIndex a, ItemIndex b) const;

  void save(const std::filesystem::path& path) const;
  static ItemKnnModel load(const std::filesystem::path& path);
};

/// Session-level co-presence counts (each session counts a pair once).
ItemKnnModel itemknn_train(const IndexSessions& sessions, std::size_t n_items, double lambda = 20.0,
                           bool exclude_self = true);

/// Similarity of every item to the last clicked item.
VecX itemknn_scores(const ItemKnnModel& model, std::span<const ItemIndex> prefix);

}  // namespace narm
