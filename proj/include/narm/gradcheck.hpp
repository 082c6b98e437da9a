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
#include <string>
#include <vector>

namespace narm {

struct GradcheckOptions {
  ModelConfig model{.n_items = 11, .embed_dim = 4, .hidden_dim = 5, .truncation = 19};
  Index prefix_length = 3;
  int seeds = 20;
  std::uint64_t first_seed = 1;
  double eps = 1e-5;
  double tolerance = 1e-5;
  /// Denominator floor of the block error. Central differences carry about
  /// 1e-16 * |L| / eps of roundoff, which dominates blocks whose gradient is
  /// itself close to zero.
  double scale_floor = 1e-10;
  /// Parameters are drawn at larger than training-init scale so every path
  /// carries a non-trivial gradient.
  double embed_bound = 0.5;
  double weight_scale = 1.5;
  bool with_dropout = false;
  /// Test hook: perturbs one analytic gradient entry so the check must fail.
  bool corrupt = false;
};

struct BlockError {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<BlockError> blocks;  // one entry per parameter block, in block order
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Relative error of one block: max_i |a_i - n_i| / max(|a|_inf, |n|_inf, floor).
double block_relative_error(const MatX& analytic, const MatX& numeric, double floor = 1e-10);

/// Compares analytic BPTT gradients against central differences of the loss,
/// block by block, over several random parameter points.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace narm
