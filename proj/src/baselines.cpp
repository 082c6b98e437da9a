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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace narm {

namespace {

void check_items(std::span<const ItemIndex> items, std::size_t n_items) {
  for (ItemIndex i : items) {
    if (i < 1 || static_cast<std::size_t>(i) > n_items) {
      throw DataError("item index " + std::to_string(i) + " outside 1.." + std::to_string(n_items));
    }
  }
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

std::string expect_line(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("truncated baseline file '" + path.string() + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

IndexSessions to_index_sessions(const SessionCorpus& corpus, const ItemVocab& vocab) {
  IndexSessions out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sessions) {
    Prefix seq;
    for (const auto& item : s.items) seq.push_back(vocab.index_of(item));
    out.push_back(std::move(seq));
  }
  return out;
}

PopModel PopModel::train(const IndexSessions& sessions, std::size_t n_items) {
  PopModel m;
  m.counts = VecX::Zero(static_cast<Index>(n_items));
  for (const auto& s : sessions) {
    check_items(s, n_items);
    for (ItemIndex i : s) m.counts[i - 1] += 1.0;
  }
  return m;
}

void PopModel::save(const std::filesystem::path& path) const {
  auto out = open_output(path);
  out << "pop\tn_items\n" << "pop\t" << n_items() << '\n' << "item\tcount\n";
  for (Index i = 0; i < counts.size(); ++i) out << (i + 1) << '\t' << static_cast<std::uint64_t>(counts[i]) << '\n';
}

PopModel PopModel::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  expect_line(in, path);
  std::istringstream head(expect_line(in, path));
  std::string kind;
  std::size_t n = 0;
  if (!(head >> kind >> n) || kind != "pop") throw DataError("'" + path.string() + "' is not a POP model");
  expect_line(in, path);
  PopModel m;
  m.counts = VecX::Zero(static_cast<Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    std::istringstream row(expect_line(in, path));
    std::size_t item = 0;
    std::uint64_t count = 0;
    if (!(row >> item >> count) || item != r + 1) throw DataError("malformed POP row in '" + path.string() + "'");
    m.counts[static_cast<Index>(r)] = static_cast<double>(count);
  }
  return m;
}

VecX pop_scores(const PopModel& model, std::span<const ItemIndex>) { return model.counts; }

VecX spop_scores(const PopModel& model, std::span<const ItemIndex> prefix) {
  check_items(prefix, model.n_items());
  const double base = model.total() + 1.0;
  VecX within = VecX::Zero(model.counts.size());
  for (ItemIndex i : prefix) within[i - 1] += 1.0;
  return (within * base + model.counts / base).eval();
}

std::uint32_t ItemKnnModel::co(ItemIndex a, ItemIndex b) const {
  const auto& row = cooccurrence.at(static_cast<std::size_t>(a - 1));
  const auto it = std::lower_bound(row.begin(), row.end(), b,
                                   [](const auto& entry, ItemIndex key) { return entry.first < key; });
  return it != row.end() && it->first == b ? it->second : 0;
}

double ItemKnnModel::similarity(ItemIndex a, ItemIndex b) const {
  const double denom = std::sqrt(double(support.at(a - 1)) * double(support.at(b - 1))) + lambda;
  const std::uint32_t c = co(a, b);
  if (c == 0) return 0.0;
  return double(c) / denom;
}

ItemKnnModel itemknn_train(const IndexSessions& sessions, std::size_t n_items, double lambda,
                           bool exclude_self) {
  if (lambda < 0.0) throw std::invalid_argument("itemknn_train: lambda must be >= 0");
  ItemKnnModel m;
  m.lambda = lambda;
  m.exclude_self = exclude_self;
  m.support.assign(n_items, 0);
  std::vector<std::map<ItemIndex, std::uint32_t>> co(n_items);
  Prefix distinct;
  for (const auto& s : sessions) {
    check_items(s, n_items);
    distinct.assign(s.begin(), s.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (std::size_t a = 0; a < distinct.size(); ++a) {
      ++m.support[distinct[a] - 1];
      for (std::size_t b = a + 1; b < distinct.size(); ++b) {
        ++co[distinct[a] - 1][distinct[b]];
        ++co[distinct[b] - 1][distinct[a]];
      }
    }
  }
  m.cooccurrence.resize(n_items);
  for (std::size_t i = 0; i < n_items; ++i) m.cooccurrence[i].assign(co[i].begin(), co[i].end());
  return m;
}

VecX itemknn_scores(const ItemKnnModel& model, std::span<const ItemIndex> prefix) {
  if (prefix.empty()) throw std::invalid_argument("itemknn_scores: empty prefix");
  check_items(prefix, model.n_items());
  const ItemIndex last = prefix.back();
  VecX scores = VecX::Zero(static_cast<Index>(model.n_items()));
  const double s_last = model.support[last - 1];
  for (const auto& [j, c] : model.cooccurrence[last - 1]) {
    scores[j - 1] = double(c) / (std::sqrt(s_last * double(model.support[j - 1])) + model.lambda);
  }
  if (model.exclude_self) scores[last - 1] = -std::numeric_limits<double>::infinity();
  return scores;
}

void ItemKnnModel::save(const std::filesystem::path& path) const {
  auto out = open_output(path);
  out << std::setprecision(17);
  out << "itemknn\tn_items\tlambda\texclude_self\n"
      << "itemknn\t" << n_items() << '\t' << lambda << '\t' << (exclude_self ? 1 : 0) << '\n';
  out << "item\tsupport\n";
  for (std::size_t i = 0; i < support.size(); ++i) out << (i + 1) << '\t' << support[i] << '\n';
  out << "item_a\titem_b\tcount\n";
  for (std::size_t i = 0; i < cooccurrence.size(); ++i) {
    for (const auto& [j, c] : cooccurrence[i]) {
      if (static_cast<std::size_t>(j) > i + 1) out << (i + 1) << '\t' << j << '\t' << c << '\n';
    }
  }
}

ItemKnnModel ItemKnnModel::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  expect_line(in, path);
  std::istringstream head(expect_line(in, path));
  std::string kind;
  std::size_t n = 0;
  int exclude = 1;
  ItemKnnModel m;
  if (!(head >> kind >> n >> m.lambda >> exclude) || kind != "itemknn") {
    throw DataError("'" + path.string() + "' is not an Item-KNN model");
  }
  m.exclude_self = exclude != 0;
  expect_line(in, path);
  m.support.assign(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    std::istringstream row(expect_line(in, path));
    std::size_t item = 0;
    if (!(row >> item >> m.support[r]) || item != r + 1) {
      throw DataError("malformed support row in '" + path.string() + "'");
    }
  }
  expect_line(in, path);
  m.cooccurrence.assign(n, {});
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    ItemIndex a = 0, b = 0;
    std::uint32_t c = 0;
    if (!(row >> a >> b >> c) || a < 1 || b < 1 || static_cast<std::size_t>(std::max(a, b)) > n) {
      throw DataError("malformed co-occurrence row in '" + path.string() + "'");
    }
    m.cooccurrence[a - 1].push_back({b, c});
    m.cooccurrence[b - 1].push_back({a, c});
  }
  for (auto& row : m.cooccurrence) std::sort(row.begin(), row.end());
  return m;
}

}  // namespace narm
