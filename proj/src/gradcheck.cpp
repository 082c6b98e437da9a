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

#include <narm/gradcheck.hpp>

#include <algorithm>
#include <cmath>

namespace narm {

namespace {

MatX& block_at(Params& p, std::size_t index) {
  MatX* found = nullptr;
  std::size_t i = 0;
  p.for_each_block([&](std::string_view, MatX& m) {
    if (i++ == index) found = &m;
  });
  return *found;
}

std::vector<std::string> block_names(const Params& p) {
  std::vector<std::string> names;
  p.for_each_block([&](std::string_view name, const MatX&) { names.emplace_back(name); });
  return names;
}

}  // namespace

double block_relative_error(const MatX& analytic, const MatX& numeric, double floor) {
  if (analytic.size() == 0) return 0.0;
  const double scale = std::max({analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), floor});
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  GradcheckReport report;
  ModelConfig cfg = options.model;
  cfg.truncation = std::max(cfg.truncation, options.prefix_length);

  for (int s = 0; s < options.seeds; ++s) {
    RngState rng(options.first_seed + static_cast<std::uint64_t>(s));
    Params params = init_params(cfg, rng, {.embed_bound = options.embed_bound,
                                           .weight_scale = options.weight_scale});
    if (cfg.use_bias) {
      params.for_each_block([&](std::string_view name, MatX& m) {
        if (name.size() == 2 && name[0] == 'b') m = uniform_init(rng, m.rows(), m.cols(), 0.5);
      });
    }
    Prefix prefix(options.prefix_length);
    for (auto& item : prefix) item = 1 + static_cast<ItemIndex>(rng.uniform_index(cfg.n_items));
    const auto label = 1 + static_cast<ItemIndex>(rng.uniform_index(cfg.n_items));

    DropoutMasks<double> masks;
    if (options.with_dropout) masks = draw_masks(params, options.prefix_length, DropoutRates{}, rng);

    const auto fwd = forward_with_masks(params, prefix, label, masks);
    Gradients analytic = backward(params, prefix, label, fwd);
    if (options.corrupt) analytic.b.data()[0] += 1e-3 * (1.0 + std::abs(analytic.b.data()[0]));

    const auto names = block_names(params);
    if (report.blocks.empty()) {
      for (const auto& n : names) report.blocks.push_back({n, 0.0});
    }
    const auto analytic_blocks = analytic.block_list();
    for (std::size_t b = 0; b < names.size(); ++b) {
      Params probe = params;
      MatX& target = block_at(probe, b);
      const std::function<double(const MatX&)> f = [&](const MatX& value) {
        target = value;
        return forward_with_masks(probe, prefix, label, masks).loss;
      };
      const MatX numeric = finite_difference_grad<double>(f, block_at(params, b), options.eps);
      const double err = block_relative_error(*analytic_blocks[b], numeric, options.scale_floor);
      report.blocks[b].max_rel_error = std::max(report.blocks[b].max_rel_error, err);
    }
  }
  report.max_rel_error = 0.0;
  for (const auto& b : report.blocks) report.max_rel_error = std::max(report.max_rel_error, b.max_rel_error);
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace narm
