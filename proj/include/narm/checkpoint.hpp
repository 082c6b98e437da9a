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

#include <narm/model.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace narm {

/// Checkpoint layout (all integers and floats little-endian):
///   "NARM" | u32 version | u32 block_count
///   per block: u32 name_len | name | u64 rows | u64 cols | rows*cols f64 (row-major)
///   config: u64 embed_dim | u64 hidden_dim | u64 n_items | u64 truncation |
///           u8 variant | u8 use_bias | u8 attention_softmax
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& out, const Params& params);
Params read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Params& params);
Params load_checkpoint(const std::filesystem::path& path);

/// Bitwise equality of every block and the config.
bool bit_identical(const Params& a, const Params& b);

}  // namespace narm
