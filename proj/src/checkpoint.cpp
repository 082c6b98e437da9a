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

#include <narm/checkpoint.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>

namespace narm {

namespace {

constexpr std::array<char, 4> kMagic = {'N', 'A', 'R', 'M'};

template <typename UInt>
void put_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt get_le(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw CheckpointError("checkpoint truncated");
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Params& params) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  const auto blocks = params.block_list();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
  params.for_each_block([&](std::string_view name, const MatX& m) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.size(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  });
  const ModelConfig& c = params.config;
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c.embed_dim));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c.hidden_dim));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c.n_items));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c.truncation));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(c.variant));
  put_le<std::uint8_t>(out, c.use_bias ? 1 : 0);
  put_le<std::uint8_t>(out, c.attention_softmax ? 1 : 0);
  if (!out) throw CheckpointError("checkpoint write failed");
}

Params read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw CheckpointError("not a NARM checkpoint (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in);
  std::map<std::string, MatX> stored;
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto len = get_le<std::uint32_t>(in);
    if (len > 64) throw CheckpointError("implausible block name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = get_le<std::uint64_t>(in);
    const auto cols = get_le<std::uint64_t>(in);
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw CheckpointError("implausible block shape");
    MatX m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
    stored.emplace(std::move(name), std::move(m));
  }
  ModelConfig c;
  c.embed_dim = static_cast<Index>(get_le<std::uint64_t>(in));
  c.hidden_dim = static_cast<Index>(get_le<std::uint64_t>(in));
  c.n_items = static_cast<Index>(get_le<std::uint64_t>(in));
  c.truncation = static_cast<Index>(get_le<std::uint64_t>(in));
  const auto variant = get_le<std::uint8_t>(in);
  if (variant > 2) throw CheckpointError("unknown variant code " + std::to_string(variant));
  c.variant = static_cast<Variant>(variant);
  c.use_bias = get_le<std::uint8_t>(in) != 0;
  c.attention_softmax = get_le<std::uint8_t>(in) != 0;
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after checkpoint");

  Params params;
  try {
    params = Params::zeros(c);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid config echo: ") + e.what());
  }
  std::size_t matched = 0;
  params.for_each_block([&](std::string_view name, MatX& m) {
    const auto it = stored.find(std::string(name));
    if (it == stored.end()) throw CheckpointError("checkpoint lacks block " + std::string(name));
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw CheckpointError("block " + std::string(name) + " has shape inconsistent with the config");
    }
    m = it->second;
    ++matched;
  });
  if (matched != stored.size()) throw CheckpointError("checkpoint has unexpected blocks");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const Params& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write '" + path.string() + "'");
  write_checkpoint(out, params);
}

Params load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

bool bit_identical(const Params& a, const Params& b) {
  if (!(a.config == b.config)) return false;
  const auto x = a.block_list(), y = b.block_list();
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i]->rows() != y[i]->rows() || x[i]->cols() != y[i]->cols()) return false;
    if (std::memcmp(x[i]->data(), y[i]->data(), sizeof(double) * static_cast<std::size_t>(x[i]->size())) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace narm
