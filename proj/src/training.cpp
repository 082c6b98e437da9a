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

#include <narm/training.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <thread>

namespace narm {

namespace {

constexpr std::size_t kReductionChunk = 16;

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("TrainConfig: " + message);
}

void add_into(Gradients& total, const Gradients& part) {
  const auto src = part.block_list();
  std::size_t i = 0;
  total.for_each_block([&](std::string_view, MatX& m) { m += *src[i++]; });
}

}  // namespace

ModelConfig TrainConfig::model_config(Index n_items) const {
  ModelConfig c;
  c.n_items = n_items;
  c.embed_dim = embed_dim;
  c.hidden_dim = hidden_dim;
  c.truncation = truncation;
  c.variant = variant;
  c.use_bias = use_bias;
  c.attention_softmax = attention_softmax;
  return c;
}

void TrainConfig::validate() const {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be finite and >= 0");
  require(batch_size >= 1 && epochs >= 1, "batch_size and epochs must be >= 1");
  require(embed_dim >= 1 && hidden_dim >= 1 && truncation >= 1, "dimensions must be >= 1");
  require(dropout_embed >= 0.0 && dropout_embed < 1.0, "dropout_embed must lie in [0, 1)");
  require(dropout_repr >= 0.0 && dropout_repr < 1.0, "dropout_repr must lie in [0, 1)");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, "validation_fraction must lie in [0, 1)");
  require(clip_norm >= 0.0, "clip_norm must be >= 0");
  require(eval_k >= 1 && threads >= 1, "eval_k and threads must be >= 1");
}

AdamState AdamState::like(const Params& params) {
  AdamState s;
  s.first = Gradients::zeros(params.config);
  s.second = Gradients::zeros(params.config);
  return s;
}

void adam_update(Params& params, const Gradients& grads, AdamState& state, double lr) {
  grads.for_each_block([](std::string_view name, const MatX& g) {
    if (!g.allFinite()) throw NumericError("non-finite gradient in parameter block " + std::string(name));
  });
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const auto g = grads.block_list();
  std::vector<MatX*> m, v;
  state.first.for_each_block([&](std::string_view, MatX& x) { m.push_back(&x); });
  state.second.for_each_block([&](std::string_view, MatX& x) { v.push_back(&x); });
  std::size_t i = 0;
  params.for_each_block([&](std::string_view, MatX& theta) {
    MatX& mi = *m[i];
    MatX& vi = *v[i];
    const MatX& gi = *g[i];
    mi = state.beta1 * mi + (1.0 - state.beta1) * gi;
    vi = state.beta2 * vi + (1.0 - state.beta2) * gi.cwiseProduct(gi);
    theta.array() -= lr * (mi.array() / c1) / ((vi.array() / c2).sqrt() + state.eps);
    ++i;
  });
}

Prefix Batch::prefix(std::size_t row) const {
  const auto r = static_cast<Index>(row);
  return Prefix(items.row(r).data(), items.row(r).data() + lengths[row]);
}

std::vector<Batch> make_batches(const ExampleSet& examples, std::size_t batch_size, RngState& rng) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Index width = 0;
    for (std::size_t i = start; i < end; ++i) {
      width = std::max(width, static_cast<Index>(examples[order[i]].prefix.size()));
    }
    Batch b;
    b.items.setZero(static_cast<Index>(end - start), width);
    for (std::size_t i = start; i < end; ++i) {
      const auto& e = examples[order[i]];
      const auto row = static_cast<Index>(i - start);
      for (std::size_t j = 0; j < e.prefix.size(); ++j) b.items(row, static_cast<Index>(j)) = e.prefix[j];
      b.lengths.push_back(static_cast<Index>(e.prefix.size()));
      b.labels.push_back(e.label);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

double batch_loss(const Params& params, const Batch& batch, RngState* rng, const BatchOptions& options,
                  Gradients* grads) {
  const std::size_t n = batch.size();
  if (n == 0) return 0.0;
  std::vector<std::uint64_t> seeds(n, 0);
  if (options.mode == Mode::kTrain) {
    if (!rng) throw std::invalid_argument("batch_loss: train mode needs an rng");
    for (auto& s : seeds) s = rng->next_u64();
  }
  const double weight = 1.0 / static_cast<double>(n);
  const std::size_t n_chunks = (n + kReductionChunk - 1) / kReductionChunk;
  const std::size_t lanes = std::min(options.threads, n_chunks);

  std::vector<Gradients> scratch;
  if (grads) {
    grads->set_zero();
    scratch.assign(lanes, Gradients::zeros(params.config));
  }
  std::vector<double> chunk_loss(n_chunks, 0.0);

  const auto run_chunk = [&](std::size_t chunk, Gradients* acc) {
    const std::size_t begin = chunk * kReductionChunk, end = std::min(n, begin + kReductionChunk);
    double sum = 0.0;
    for (std::size_t row = begin; row < end; ++row) {
      const Prefix prefix = batch.prefix(row);
      RngState local(seeds[row]);
      const auto fwd = forward(params, std::span<const ItemIndex>(prefix), batch.labels[row], options.mode,
                               &local, options.rates);
      sum += fwd.loss;
      if (acc) accumulate_gradients(params, std::span<const ItemIndex>(prefix), batch.labels[row], fwd, *acc, weight);
    }
    chunk_loss[chunk] = sum;
  };

  for (std::size_t wave = 0; wave < n_chunks; wave += lanes) {
    const std::size_t width = std::min(lanes, n_chunks - wave);
    for (auto& s : scratch) s.set_zero();
    if (width == 1) {
      run_chunk(wave, grads ? &scratch[0] : nullptr);
    } else {
      std::vector<std::thread> workers;
      for (std::size_t l = 0; l < width; ++l) {
        workers.emplace_back(run_chunk, wave + l, grads ? &scratch[l] : nullptr);
      }
      for (auto& w : workers) w.join();
    }
    if (grads) {
      for (std::size_t l = 0; l < width; ++l) add_into(*grads, scratch[l]);
    }
  }
  double total = 0.0;
  for (double l : chunk_loss) total += l;
  return total * weight;
}

std::pair<ExampleSet, ExampleSet> validation_split(const ExampleSet& examples, double fraction, RngState& rng) {
  ExampleSet shuffled = examples;
  rng.shuffle(shuffled.begin(), shuffled.end());
  const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(shuffled.size())));
  ExampleSet val(shuffled.end() - static_cast<std::ptrdiff_t>(n_val), shuffled.end());
  shuffled.resize(shuffled.size() - n_val);
  return {std::move(shuffled), std::move(val)};
}

TrainResult train(const ExampleSet& examples, Index n_items, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (examples.empty()) throw std::invalid_argument("train: no examples");
  const ModelConfig model_cfg = config.model_config(n_items);
  model_cfg.validate();

  RngState rng(config.seed);
  TrainResult result;
  Params params = init_params(model_cfg, rng, config.init);
  auto [train_set, val_set] = validation_split(examples, config.validation_fraction, rng);
  if (config.validation_fraction > 0.0 && val_set.empty()) {
    throw std::invalid_argument("train: validation split is empty");
  }
  if (train_set.empty()) throw std::invalid_argument("train: training split is empty");
  result.n_train = train_set.size();
  result.n_validation = val_set.size();

  AdamState adam = AdamState::like(params);
  Gradients grads = Gradients::zeros(model_cfg);
  const BatchOptions options{Mode::kTrain, {config.dropout_embed, config.dropout_repr}, config.threads};
  double best_recall = -1.0;
  result.best = params;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto batches = make_batches(train_set, config.batch_size, rng);
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      const double loss = batch_loss(params, batch, &rng, options, &grads);
      if (!std::isfinite(loss)) throw NumericError("non-finite loss in epoch " + std::to_string(epoch));
      loss_sum += loss * static_cast<double>(batch.size());
      if (config.clip_norm > 0.0) {
        double sq = 0.0;
        grads.for_each_block([&](std::string_view, const MatX& g) { sq += g.squaredNorm(); });
        const double norm = std::sqrt(sq);
        if (norm > config.clip_norm) {
          grads.for_each_block([&](std::string_view, MatX& g) { g *= config.clip_norm / norm; });
        }
      }
      adam_update(params, grads, adam, config.learning_rate);
    }
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(train_set.size());
    if (!val_set.empty()) {
      const auto report = evaluate(narm_scorer(params), val_set, config.eval_k);
      log.val_recall = report.recall;
      log.val_mrr = report.mrr;
    }
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (val_set.empty() || log.val_recall > best_recall) {
      best_recall = log.val_recall;
      result.best = params;
      result.best_epoch = epoch;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log, params);
  }
  result.last = std::move(params);
  return result;
}

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log, std::size_t k) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  out << "epoch\tmean_loss\tval_recall@" << k << "\tval_mrr@" << k << "\twall_seconds\n";
  for (const auto& e : log) {
    out << e.epoch << '\t' << e.mean_loss << '\t' << e.val_recall << '\t' << e.val_mrr << '\t'
        << std::setprecision(6) << e.wall_seconds << std::setprecision(17) << '\n';
  }
}

}  // namespace narm
