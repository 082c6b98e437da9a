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
#include <narm/evaluation.hpp>
#include <narm/model.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace narm {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 512;
  std::size_t epochs = 30;
  Index embed_dim = 50;
  Index hidden_dim = 100;
  Index truncation = 19;
  double dropout_embed = 0.25;
  double dropout_repr = 0.50;
  /// Tail fraction of the shuffled examples held out for model selection.
  /// 0 disables selection and returns the last epoch.
  double validation_fraction = 0.10;
  std::uint64_t seed = 42;

  Variant variant = Variant::kHybrid;
  bool use_bias = false;
  bool attention_softmax = false;
  /// Global gradient-norm clip; 0 is off.
  double clip_norm = 0.0;
  std::size_t eval_k = 20;
  std::size_t threads = 1;
  InitConfig init;

  ModelConfig model_config(Index n_items) const;
  void validate() const;
};

struct AdamState {
  Gradients first;
  Gradients second;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const Params& params);
};

/// One bias-corrected Adam step. Throws NumericError naming the first
/// parameter block with a non-finite gradient, before touching anything.
void adam_update(Params& params, const Gradients& grads, AdamState& state, double lr);

/// Examples padded with 0 to the longest prefix in the batch.
struct Batch {
  Eigen::Matrix<ItemIndex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> items;
  std::vector<Index> lengths;
  std::vector<ItemIndex> labels;

  std::size_t size() const { return labels.size(); }
  Prefix prefix(std::size_t row) const;
};

std::vector<Batch> make_batches(const ExampleSet& examples, std::size_t batch_size, RngState& rng);

struct BatchOptions {
  Mode mode = Mode::kEval;
  DropoutRates rates{0.0, 0.0};
  std::size_t threads = 1;
};

/// Mean loss over the batch; when grads is given it receives the gradient of
/// that mean. Examples are reduced in fixed chunks and a fixed order, so the
/// result does not depend on the thread count. In train mode each example's
/// masks come from its own generator seeded from rng in row order.
double batch_loss(const Params& params, const Batch& batch, RngState* rng, const BatchOptions& options,
                  Gradients* grads = nullptr);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double val_recall = 0.0;
  double val_mrr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Params best;
  Params last;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
};

using EpochCallback = std::function<void(const EpochLog&, const Params&)>;

/// Shuffles, holds out the validation tail, then runs epochs of mini-batch
/// Adam. Keeps the epoch with the best validation Recall@k (first on ties).
TrainResult train(const ExampleSet& examples, Index n_items, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Shuffle and split exactly as train() does.
std::pair<ExampleSet, ExampleSet> validation_split(const ExampleSet& examples, double fraction, RngState& rng);

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log, std::size_t k = 20);

}  // namespace narm
