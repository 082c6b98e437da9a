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

#include <narm/baselines.hpp>
#include <narm/evaluation.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

using namespace narm;
namespace fs = std::filesystem;

namespace {

IndexSessions random_sessions(RngState& rng, std::size_t n, std::size_t m, std::size_t max_len) {
  IndexSessions out(n);
  for (auto& s : out) {
    s.resize(1 + rng.uniform_index(max_len));
    // Skewed item draw so supports differ.
    for (auto& i : s) {
      const double u = rng.uniform01();
      i = static_cast<ItemIndex>(1 + static_cast<std::size_t>(u * u * static_cast<double>(m)));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("to_index_sessions") {
  ItemVocab vocab;
  vocab.add("x");
  vocab.add("y");
  SessionCorpus c;
  c.sessions.push_back({"s", 0, 1, {"y", "x", "y"}});
  CHECK(to_index_sessions(c, vocab) == IndexSessions{{2, 1, 2}});
  c.sessions.push_back({"t", 0, 1, {"q"}});
  CHECK_THROWS(to_index_sessions(c, vocab));
}

TEST_CASE("POP") {
  const auto pop = PopModel::train({{1, 1, 2}, {1, 2, 1, 1, 2}}, 3);
  CHECK(pop.counts == (VecX(3) << 5, 3, 0).finished());
  CHECK(pop.total() == 8);
  const Prefix p{3};
  CHECK(rank_of(pop_scores(pop, std::span<const ItemIndex>(p)), 1) == 1);

  const auto flat = PopModel::train({{1, 2, 3, 4}}, 4);
  for (ItemIndex i = 1; i <= 4; ++i) CHECK(rank_of(pop_scores(flat, std::span<const ItemIndex>(p)), i) == std::size_t(i));

  SUBCASE("argmax is the most frequent item and prefixes are ignored") {
    RngState rng(1);
    for (int trial = 0; trial < 10; ++trial) {
      const auto sessions = random_sessions(rng, 200, 25, 6);
      std::vector<std::size_t> count(26, 0);
      for (const auto& s : sessions)
        for (ItemIndex i : s) ++count[i];
      const auto best = static_cast<ItemIndex>(std::max_element(count.begin() + 1, count.end()) - count.begin());
      const auto model = PopModel::train(sessions, 25);
      const VecX a = pop_scores(model, std::span<const ItemIndex>(sessions[0]));
      const VecX b = pop_scores(model, std::span<const ItemIndex>(sessions[1]));
      CHECK(top_k(a, 1).front() == best);
      CHECK(a == b);
    }
  }
  SUBCASE("file round trip") {
    const fs::path path = fs::temp_directory_path() / "narm_pop.tsv";
    pop.save(path);
    CHECK(PopModel::load(path).counts == pop.counts);
  }
}

TEST_CASE("S-POP") {
  const auto pop = PopModel::train({{1, 2, 2, 2, 3, 3}}, 3);
  const Prefix aab{1, 1, 2};
  const VecX s = spop_scores(pop, std::span<const ItemIndex>(aab));
  CHECK(s[0] > s[1]);
  const Prefix ab{1, 2};
  const VecX t = spop_scores(pop, std::span<const ItemIndex>(ab));
  CHECK(t[1] > t[0]);  // equal within counts, item 2 is globally more popular
  CHECK(t[0] > t[2]);  // item 3 is absent from the prefix

  SUBCASE("lexicographic sort oracle") {
    RngState rng(2);
    const auto sessions = random_sessions(rng, 300, 30, 8);
    const auto model = PopModel::train(sessions, 30);
    for (int trial = 0; trial < 50; ++trial) {
      Prefix prefix(1 + rng.uniform_index(10));
      for (auto& i : prefix) i = static_cast<ItemIndex>(1 + rng.uniform_index(30));
      std::vector<std::size_t> within(31, 0);
      for (ItemIndex i : prefix) ++within[i];
      std::vector<ItemIndex> order(30);
      std::iota(order.begin(), order.end(), 1);
      std::stable_sort(order.begin(), order.end(), [&](ItemIndex a, ItemIndex b) {
        return std::pair(within[a], model.counts[a - 1]) > std::pair(within[b], model.counts[b - 1]);
      });
      const VecX scores = spop_scores(model, std::span<const ItemIndex>(prefix));
      CHECK(top_k(scores, 30) == order);
    }
  }
}

TEST_CASE("Item-KNN counts") {
  const auto knn = itemknn_train({{1, 2}, {1, 3}}, 4);
  CHECK(knn.co(1, 2) == 1);
  CHECK(knn.co(2, 1) == 1);
  CHECK(knn.co(2, 3) == 0);
  CHECK(knn.support[0] == 2);
  CHECK(knn.support[3] == 0);
  const Prefix four{4};
  const VecX isolated = itemknn_scores(knn, std::span<const ItemIndex>(four));
  for (Index i = 0; i < 3; ++i) CHECK(isolated[i] == 0.0);
  CHECK(std::isinf(isolated[3]));
  CHECK(isolated[3] < 0);

  SUBCASE("quadratic brute-force oracle") {
    RngState rng(3);
    const auto sessions = random_sessions(rng, 150, 20, 7);
    const auto model = itemknn_train(sessions, 20);
    for (ItemIndex a = 1; a <= 20; ++a) {
      std::uint32_t supp = 0;
      for (const auto& s : sessions) supp += std::find(s.begin(), s.end(), a) != s.end();
      CHECK(model.support[a - 1] == supp);
      for (ItemIndex b = 1; b <= 20; ++b) {
        if (a == b) continue;
        std::uint32_t co = 0;
        for (const auto& s : sessions) {
          bool has_a = false, has_b = false;
          for (std::size_t x = 0; x < s.size(); ++x) {
            has_a |= s[x] == a;
            has_b |= s[x] == b;
          }
          co += has_a && has_b;
        }
        CHECK(model.co(a, b) == co);
        CHECK(co <= std::min(model.support[a - 1], model.support[b - 1]));
        const double sim = co / (std::sqrt(double(model.support[a - 1]) * double(model.support[b - 1])) + 20.0);
        CHECK(std::abs(model.similarity(a, b) - sim) <= 1e-12 * sim);
        CHECK(model.similarity(a, b) == model.similarity(b, a));
        CHECK(std::isfinite(model.similarity(a, b)));
      }
    }
    const Prefix pre{3, 7, 5};
    const VecX s = itemknn_scores(model, std::span<const ItemIndex>(pre));
    for (ItemIndex b = 1; b <= 20; ++b) {
      if (b != 5) CHECK(s[b - 1] == model.similarity(5, b));
    }
    CHECK(std::isinf(s[4]));

    const fs::path path = fs::temp_directory_path() / "narm_knn.tsv";
    model.save(path);
    const auto loaded = ItemKnnModel::load(path);
    CHECK(loaded.support == model.support);
    CHECK(loaded.cooccurrence == model.cooccurrence);
    CHECK(loaded.lambda == model.lambda);
  }
}

TEST_CASE("Item-KNN formula and flags") {
  IndexSessions same(4, Prefix{1, 2});
  const auto tight = itemknn_train(same, 2, 0.0);
  CHECK(tight.similarity(1, 2) == 1.0);
  const auto keep = itemknn_train(same, 2, 20.0, false);
  const Prefix one{1};
  const VecX s = itemknn_scores(keep, std::span<const ItemIndex>(one));
  CHECK(std::isfinite(s[0]));
  CHECK(s[1] == doctest::Approx(4.0 / 24.0).epsilon(1e-15));
}
