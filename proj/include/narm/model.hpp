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

// NARM network: item embedding, one GRU layer shared by the global and local
// encoders, item-level attention, hybrid session representation and a
// bi-linear decoder over all m items. Gradients are hand-derived (BPTT over
// the whole, already truncated, prefix).

#include <narm/numerics.hpp>
#include <narm/types.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace narm {

/// Which session features feed the decoder.
enum class Variant : std::uint8_t { kHybrid = 0, kGlobal = 1, kLocal = 2 };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kHybrid: return "hybrid";
    case Variant::kGlobal: return "global";
    case Variant::kLocal: return "local";
  }
  return "hybrid";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "hybrid") return Variant::kHybrid;
  if (s == "global") return Variant::kGlobal;
  if (s == "local") return Variant::kLocal;
  throw std::invalid_argument("unknown model variant '" + std::string(s) + "'");
}

struct ModelConfig {
  Index n_items = 0;  // m; real items are 1..m
  Index embed_dim = 50;
  Index hidden_dim = 100;
  Index truncation = 19;
  Variant variant = Variant::kHybrid;
  bool use_bias = false;
  bool attention_softmax = false;

  /// Width of the session representation c.
  Index repr_dim() const { return variant == Variant::kHybrid ? 2 * hidden_dim : hidden_dim; }

  void validate() const {
    if (n_items < 1) throw std::invalid_argument("ModelConfig: n_items must be >= 1");
    if (embed_dim < 1 || hidden_dim < 1) throw std::invalid_argument("ModelConfig: dims must be >= 1");
    if (truncation < 1) throw std::invalid_argument("ModelConfig: truncation must be >= 1");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// All learnable weights. Bias blocks are 0-row when use_bias is off.
template <typename Scalar>
struct NarmParams {
  ModelConfig config;
  Mat<Scalar> emb;  // (m+1) x D, row 0 is padding
  Mat<Scalar> w_z, u_z;
  Mat<Scalar> w_r, u_r;
  Mat<Scalar> w_h, u_h;
  Mat<Scalar> a1, a2;  // H x H
  Mat<Scalar> v;       // H x 1
  Mat<Scalar> b;       // D x repr_dim
  Mat<Scalar> bias_z, bias_r, bias_h, bias_att;  // H x 1
  Mat<Scalar> bias_dec;                          // m x 1

  static NarmParams zeros(const ModelConfig& cfg) {
    cfg.validate();
    const Index m = cfg.n_items, d = cfg.embed_dim, h = cfg.hidden_dim;
    const Index nb = cfg.use_bias ? 1 : 0;
    NarmParams p;
    p.config = cfg;
    p.emb = Mat<Scalar>::Zero(m + 1, d);
    p.w_z = p.w_r = p.w_h = Mat<Scalar>::Zero(h, d);
    p.u_z = p.u_r = p.u_h = Mat<Scalar>::Zero(h, h);
    p.a1 = p.a2 = Mat<Scalar>::Zero(h, h);
    p.v = Mat<Scalar>::Zero(h, 1);
    p.b = Mat<Scalar>::Zero(d, cfg.repr_dim());
    p.bias_z = p.bias_r = p.bias_h = p.bias_att = Mat<Scalar>::Zero(h * nb, 1);
    p.bias_dec = Mat<Scalar>::Zero(m * nb, 1);
    return p;
  }

  template <typename F>
  void for_each_block(F&& f) {
    for_each_block_impl(*this, f);
  }
  template <typename F>
  void for_each_block(F&& f) const {
    for_each_block_impl(*this, f);
  }

  bool same_shape(const NarmParams& o) const {
    const auto mine = block_list(), theirs = o.block_list();
    if (mine.size() != theirs.size()) return false;
    for (std::size_t i = 0; i < mine.size(); ++i) {
      if (mine[i]->rows() != theirs[i]->rows() || mine[i]->cols() != theirs[i]->cols()) return false;
    }
    return true;
  }

  std::vector<const Mat<Scalar>*> block_list() const {
    std::vector<const Mat<Scalar>*> out;
    for_each_block([&](std::string_view, const Mat<Scalar>& m) { out.push_back(&m); });
    return out;
  }

  Index parameter_count() const {
    Index n = 0;
    for_each_block([&](std::string_view, const Mat<Scalar>& m) { n += m.size(); });
    return n;
  }

  void set_zero() {
    for_each_block([](std::string_view, Mat<Scalar>& m) { m.setZero(); });
  }

 private:
  template <typename Self, typename F>
  static void for_each_block_impl(Self& s, F& f) {
    f(std::string_view("emb"), s.emb);
    f(std::string_view("Wz"), s.w_z);
    f(std::string_view("Uz"), s.u_z);
    f(std::string_view("Wr"), s.w_r);
    f(std::string_view("Ur"), s.u_r);
    f(std::string_view("W"), s.w_h);
    f(std::string_view("U"), s.u_h);
    f(std::string_view("A1"), s.a1);
    f(std::string_view("A2"), s.a2);
    f(std::string_view("v"), s.v);
    f(std::string_view("B"), s.b);
    if (s.config.use_bias) {
      f(std::string_view("bz"), s.bias_z);
      f(std::string_view("br"), s.bias_r);
      f(std::string_view("bh"), s.bias_h);
      f(std::string_view("ba"), s.bias_att);
      f(std::string_view("bd"), s.bias_dec);
    }
  }
};

/// Same shapes as the parameters, one gradient per block.
template <typename Scalar>
using GradientSet = NarmParams<Scalar>;

using Params = NarmParams<double>;
using Gradients = GradientSet<double>;

struct InitConfig {
  double embed_bound = 0.1;
  /// Weight matrices use U[-scale/sqrt(fan_in), scale/sqrt(fan_in)].
  double weight_scale = 1.0;
};

/// Embeddings U[-0.1, 0.1] (row 0 kept zero), weights U[-1/sqrt(fan_in), +].
/// Biases start at zero.
template <typename Scalar = double>
NarmParams<Scalar> init_params(const ModelConfig& cfg, RngState& rng, const InitConfig& init = {}) {
  auto p = NarmParams<Scalar>::zeros(cfg);
  const auto fan = [&](Index fan_in) { return init.weight_scale / std::sqrt(double(fan_in)); };
  const Index d = cfg.embed_dim, h = cfg.hidden_dim;
  p.emb = uniform_init<Scalar>(rng, cfg.n_items + 1, d, init.embed_bound);
  p.emb.row(0).setZero();
  p.w_z = uniform_init<Scalar>(rng, h, d, fan(d));
  p.u_z = uniform_init<Scalar>(rng, h, h, fan(h));
  p.w_r = uniform_init<Scalar>(rng, h, d, fan(d));
  p.u_r = uniform_init<Scalar>(rng, h, h, fan(h));
  p.w_h = uniform_init<Scalar>(rng, h, d, fan(d));
  p.u_h = uniform_init<Scalar>(rng, h, h, fan(h));
  p.a1 = uniform_init<Scalar>(rng, h, h, fan(h));
  p.a2 = uniform_init<Scalar>(rng, h, h, fan(h));
  p.v = uniform_init<Scalar>(rng, h, 1, fan(h));
  p.b = uniform_init<Scalar>(rng, d, cfg.repr_dim(), fan(cfg.repr_dim()));
  return p;
}

/// Intermediate values of one GRU step, kept for the backward pass.
template <typename Scalar>
struct GruStepCache {
  Vec<Scalar> x;  // (masked) input embedding
  Vec<Scalar> h_prev;
  Vec<Scalar> z, r, h_hat, h;
};

template <typename Scalar>
struct EncodedSession {
  std::vector<Vec<Scalar>> hidden;  // h_1..h_t
  std::vector<GruStepCache<Scalar>> steps;
  std::vector<Vec<Scalar>> attention_act;  // sigmoid(A1 h_t + A2 h_j) per j
  Vec<Scalar> attention_scores;            // q(h_t, h_j), raw
  Vec<Scalar> attention_weights;           // alpha_tj
  Vec<Scalar> c_global, c_local, c;

  Index length() const { return static_cast<Index>(hidden.size()); }
};

template <typename Scalar>
struct Prediction {
  Vec<Scalar> scores;  // S_i for items 1..m at positions 0..m-1
  Vec<Scalar> probs;
  Vec<Scalar> projected;  // B * c (after dropout on c)
};

/// Dropout masks drawn in train mode; empty means identity.
template <typename Scalar>
struct DropoutMasks {
  std::vector<Vec<Scalar>> embed;  // one D-vector per step
  Vec<Scalar> repr;                // repr_dim vector

  bool empty() const { return embed.empty() && repr.size() == 0; }
};

struct DropoutRates {
  double embed = 0.25;
  double repr = 0.50;
};

enum class Mode { kTrain, kEval };

template <typename Scalar>
struct ForwardResult {
  Prediction<Scalar> prediction;
  Scalar loss = 0;
  EncodedSession<Scalar> encoded;
  DropoutMasks<Scalar> masks;
};

namespace detail {

template <typename Scalar>
void check_prefix(const NarmParams<Scalar>& p, std::span<const ItemIndex> prefix) {
  if (prefix.empty()) throw std::invalid_argument("encode: empty prefix");
  if (static_cast<Index>(prefix.size()) > p.config.truncation) {
    throw std::invalid_argument("encode: prefix longer than truncation " +
                                std::to_string(p.config.truncation));
  }
  for (ItemIndex i : prefix) {
    if (i < 1 || i > p.config.n_items) {
      throw std::out_of_range("encode: item index " + std::to_string(i) + " outside 1.." +
                              std::to_string(p.config.n_items));
    }
  }
}

template <typename Scalar>
void check_label(const NarmParams<Scalar>& p, ItemIndex label) {
  if (label < 1 || label > p.config.n_items) {
    throw std::out_of_range("label " + std::to_string(label) + " outside 1.." +
                            std::to_string(p.config.n_items));
  }
}

template <typename Scalar, typename D>
Vec<Scalar> sigmoid_vec(const Eigen::MatrixBase<D>& a) {
  return a.unaryExpr([](Scalar x) { return sigmoid(x); });
}

}  // namespace detail

/// One GRU step, caching gates. Bias terms are added only when enabled.
template <typename Scalar>
Vec<Scalar> gru_step(const NarmParams<Scalar>& p, const Vec<Scalar>& x, const Vec<Scalar>& h_prev,
                     GruStepCache<Scalar>* cache = nullptr) {
  const Index h = p.config.hidden_dim;
  if (x.size() != p.config.embed_dim || h_prev.size() != h) {
    throw DimensionError("gru_step: expected x of size " + std::to_string(p.config.embed_dim) +
                         " and h_prev of size " + std::to_string(h));
  }
  Vec<Scalar> a_z = p.w_z * x + p.u_z * h_prev;
  Vec<Scalar> a_r = p.w_r * x + p.u_r * h_prev;
  if (p.config.use_bias) {
    a_z += p.bias_z;
    a_r += p.bias_r;
  }
  Vec<Scalar> z = detail::sigmoid_vec<Scalar>(a_z);
  Vec<Scalar> r = detail::sigmoid_vec<Scalar>(a_r);
  Vec<Scalar> a_h = p.w_h * x + p.u_h * r.cwiseProduct(h_prev);
  if (p.config.use_bias) a_h += p.bias_h;
  Vec<Scalar> h_hat = a_h.array().tanh().matrix();
  Vec<Scalar> out = (Scalar(1) - z.array()).matrix().cwiseProduct(h_prev) + z.cwiseProduct(h_hat);
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->h_hat = std::move(h_hat);
    cache->h = out;
  }
  return out;
}

/// Runs the GRU over the prefix from h_0 = 0. Embedding dropout is applied to
/// each input when masks are given (one mask per position).
template <typename Scalar>
EncodedSession<Scalar> encode(const NarmParams<Scalar>& p, std::span<const ItemIndex> prefix,
                              const std::vector<Vec<Scalar>>* embed_masks = nullptr) {
  detail::check_prefix(p, prefix);
  if (embed_masks && !embed_masks->empty() && embed_masks->size() != prefix.size()) {
    throw DimensionError("encode: one embedding mask per position required");
  }
  EncodedSession<Scalar> enc;
  enc.hidden.reserve(prefix.size());
  enc.steps.resize(prefix.size());
  Vec<Scalar> h = Vec<Scalar>::Zero(p.config.hidden_dim);
  for (std::size_t j = 0; j < prefix.size(); ++j) {
    Vec<Scalar> x = p.emb.row(prefix[j]).transpose();
    if (embed_masks && !embed_masks->empty()) x = x.cwiseProduct((*embed_masks)[j]);
    h = gru_step(p, x, h, &enc.steps[j]);
    enc.hidden.push_back(h);
  }
  return enc;
}

/// q(h_t, h_j) = v^T sigmoid(A1 h_t + A2 h_j).
template <typename Scalar>
Scalar attention_score(const NarmParams<Scalar>& p, const Vec<Scalar>& h_t, const Vec<Scalar>& h_j) {
  const Index h = p.config.hidden_dim;
  if (h_t.size() != h || h_j.size() != h) throw DimensionError("attention_score: hidden size mismatch");
  Vec<Scalar> pre = p.a1 * h_t + p.a2 * h_j;
  if (p.config.use_bias) pre += p.bias_att;
  return p.v.col(0).dot(detail::sigmoid_vec<Scalar>(pre));
}

/// Fills the attention fields of enc and returns c_local = sum_j alpha_tj h_j.
/// Weights are the raw scores unless attention_softmax is set.
template <typename Scalar>
Vec<Scalar> local_feature(const NarmParams<Scalar>& p, EncodedSession<Scalar>& enc) {
  const Index t = enc.length();
  if (t < 1) throw std::invalid_argument("local_feature: no hidden states");
  const Vec<Scalar>& h_t = enc.hidden.back();
  Vec<Scalar> base = p.a1 * h_t;
  if (p.config.use_bias) base += p.bias_att;
  enc.attention_act.resize(t);
  enc.attention_scores.resize(t);
  for (Index j = 0; j < t; ++j) {
    enc.attention_act[j] = detail::sigmoid_vec<Scalar>(base + p.a2 * enc.hidden[j]);
    enc.attention_scores[j] = p.v.col(0).dot(enc.attention_act[j]);
  }
  enc.attention_weights =
      p.config.attention_softmax ? Vec<Scalar>(softmax(enc.attention_scores)) : enc.attention_scores;
  Vec<Scalar> c_local = Vec<Scalar>::Zero(p.config.hidden_dim);
  for (Index j = 0; j < t; ++j) c_local += enc.attention_weights[j] * enc.hidden[j];
  enc.c_local = c_local;
  return c_local;
}

/// c_global = h_t, c_local from attention, c = [c_global; c_local] (or one
/// half alone for the ablation variants).
template <typename Scalar>
void session_representation(const NarmParams<Scalar>& p, EncodedSession<Scalar>& enc) {
  enc.c_global = enc.hidden.back();
  local_feature(p, enc);
  switch (p.config.variant) {
    case Variant::kHybrid: enc.c = concat_rows(enc.c_global, enc.c_local); break;
    case Variant::kGlobal: enc.c = enc.c_global; break;
    case Variant::kLocal: enc.c = enc.c_local; break;
  }
}

/// S_i = emb_i^T B c for i in 1..m, probs = softmax(S).
template <typename Scalar>
Prediction<Scalar> decode(const NarmParams<Scalar>& p, const Vec<Scalar>& c,
                          const Vec<Scalar>* repr_mask = nullptr) {
  if (c.size() != p.config.repr_dim()) throw DimensionError("decode: representation size mismatch");
  Prediction<Scalar> out;
  if (repr_mask && repr_mask->size() > 0) {
    out.projected = p.b * c.cwiseProduct(*repr_mask);
  } else {
    out.projected = p.b * c;
  }
  out.scores = p.emb.bottomRows(p.config.n_items) * out.projected;
  if (p.config.use_bias) out.scores += p.bias_dec.col(0);
  out.probs = softmax(out.scores);
  return out;
}

/// Cross entropy against a one-hot target, clamped to stay finite.
template <typename Scalar>
Scalar loss(const Prediction<Scalar>& pred, ItemIndex label) {
  if (label < 1 || label > pred.probs.size()) {
    throw std::out_of_range("loss: label " + std::to_string(label) + " out of range");
  }
  const Scalar q = std::max(pred.probs[label - 1], std::numeric_limits<Scalar>::min());
  return -std::log(q);
}

template <typename Scalar>
DropoutMasks<Scalar> draw_masks(const NarmParams<Scalar>& p, Index length, const DropoutRates& rates,
                                RngState& rng) {
  DropoutMasks<Scalar> m;
  if (rates.embed > 0.0) {
    m.embed.reserve(length);
    for (Index j = 0; j < length; ++j) {
      m.embed.push_back(dropout_mask<Scalar>(rng, p.config.embed_dim, 1, 1.0 - rates.embed).col(0));
    }
  }
  if (rates.repr > 0.0) m.repr = dropout_mask<Scalar>(rng, p.config.repr_dim(), 1, 1.0 - rates.repr).col(0);
  return m;
}

/// encode -> session_representation -> decode -> loss. Train mode draws
/// fresh masks from rng; eval mode uses none.
template <typename Scalar>
ForwardResult<Scalar> forward(const NarmParams<Scalar>& p, std::span<const ItemIndex> prefix,
                              ItemIndex label, Mode mode = Mode::kEval, RngState* rng = nullptr,
                              const DropoutRates& rates = {}) {
  detail::check_label(p, label);
  detail::check_prefix(p, prefix);
  ForwardResult<Scalar> out;
  if (mode == Mode::kTrain) {
    if (!rng) throw std::invalid_argument("forward: train mode needs an rng");
    out.masks = draw_masks(p, static_cast<Index>(prefix.size()), rates, *rng);
  }
  out.encoded = encode(p, prefix, &out.masks.embed);
  session_representation(p, out.encoded);
  out.prediction = decode(p, out.encoded.c, &out.masks.repr);
  out.loss = loss(out.prediction, label);
  return out;
}

/// Forward pass with masks supplied by the caller (used by gradient checks).
template <typename Scalar>
ForwardResult<Scalar> forward_with_masks(const NarmParams<Scalar>& p, std::span<const ItemIndex> prefix,
                                         ItemIndex label, const DropoutMasks<Scalar>& masks) {
  detail::check_label(p, label);
  ForwardResult<Scalar> out;
  out.masks = masks;
  out.encoded = encode(p, prefix, &out.masks.embed);
  session_representation(p, out.encoded);
  out.prediction = decode(p, out.encoded.c, &out.masks.repr);
  out.loss = loss(out.prediction, label);
  return out;
}

/// Adds weight * dL/dtheta into grads. The forward artifacts (including the
/// dropout masks) must come from the same prefix and label.
template <typename Scalar>
void accumulate_gradients(const NarmParams<Scalar>& p, std::span<const ItemIndex> prefix, ItemIndex label,
                          const ForwardResult<Scalar>& fwd, GradientSet<Scalar>& grads,
                          Scalar weight = Scalar(1)) {
  const ModelConfig& cfg = p.config;
  const Index m = cfg.n_items, hdim = cfg.hidden_dim;
  const auto& enc = fwd.encoded;
  const auto& pred = fwd.prediction;
  const Index t = enc.length();

  // Decoder.
  Vec<Scalar> d_scores = pred.probs * weight;
  d_scores[label - 1] -= weight;
  if (cfg.use_bias) grads.bias_dec.col(0) += d_scores;
  grads.emb.bottomRows(m).noalias() += d_scores * pred.projected.transpose();
  const Vec<Scalar> d_proj = p.emb.bottomRows(m).transpose() * d_scores;
  const bool masked_repr = fwd.masks.repr.size() > 0;
  const Vec<Scalar> c_used = masked_repr ? Vec<Scalar>(enc.c.cwiseProduct(fwd.masks.repr)) : enc.c;
  grads.b.noalias() += d_proj * c_used.transpose();
  Vec<Scalar> d_c = p.b.transpose() * d_proj;
  if (masked_repr) d_c = d_c.cwiseProduct(fwd.masks.repr);

  // Split into global and local halves.
  std::vector<Vec<Scalar>> d_hidden(t, Vec<Scalar>::Zero(hdim));
  Vec<Scalar> d_local = Vec<Scalar>::Zero(hdim);
  switch (cfg.variant) {
    case Variant::kHybrid:
      d_hidden[t - 1] += d_c.head(hdim);
      d_local = d_c.tail(hdim);
      break;
    case Variant::kGlobal: d_hidden[t - 1] += d_c; break;
    case Variant::kLocal: d_local = d_c; break;
  }

  // Attention: c_local = sum_j alpha_j h_j, alpha = q (or softmax(q)).
  if (cfg.variant != Variant::kGlobal) {
    Vec<Scalar> d_alpha(t);
    for (Index j = 0; j < t; ++j) {
      d_alpha[j] = enc.hidden[j].dot(d_local);
      d_hidden[j] += enc.attention_weights[j] * d_local;
    }
    Vec<Scalar> d_q = d_alpha;
    if (cfg.attention_softmax) {
      const Scalar mean = enc.attention_weights.dot(d_alpha);
      d_q = enc.attention_weights.cwiseProduct((d_alpha.array() - mean).matrix());
    }
    Vec<Scalar> d_base = Vec<Scalar>::Zero(hdim);
    const auto v = p.v.col(0);
    for (Index j = 0; j < t; ++j) {
      const Vec<Scalar>& u = enc.attention_act[j];
      grads.v.col(0) += d_q[j] * u;
      const Vec<Scalar> d_pre =
          (d_q[j] * v.array() * u.array() * (Scalar(1) - u.array())).matrix();
      grads.a2.noalias() += d_pre * enc.hidden[j].transpose();
      d_hidden[j].noalias() += p.a2.transpose() * d_pre;
      d_base += d_pre;
    }
    if (cfg.use_bias) grads.bias_att.col(0) += d_base;
    grads.a1.noalias() += d_base * enc.hidden[t - 1].transpose();
    d_hidden[t - 1].noalias() += p.a1.transpose() * d_base;
  }

  // BPTT through the GRU.
  Vec<Scalar> d_next = Vec<Scalar>::Zero(hdim);
  for (Index j = t - 1; j >= 0; --j) {
    const auto& s = enc.steps[j];
    const Vec<Scalar> dh = d_hidden[j] + d_next;
    const Vec<Scalar> d_z = dh.cwiseProduct(s.h_hat - s.h_prev);
    const Vec<Scalar> d_hhat = dh.cwiseProduct(s.z);
    Vec<Scalar> d_prev = dh.cwiseProduct((Scalar(1) - s.z.array()).matrix());

    const Vec<Scalar> d_ah = d_hhat.cwiseProduct((Scalar(1) - s.h_hat.array().square()).matrix());
    const Vec<Scalar> gated = s.r.cwiseProduct(s.h_prev);
    grads.w_h.noalias() += d_ah * s.x.transpose();
    grads.u_h.noalias() += d_ah * gated.transpose();
    Vec<Scalar> d_x = p.w_h.transpose() * d_ah;
    const Vec<Scalar> d_gated = p.u_h.transpose() * d_ah;
    const Vec<Scalar> d_r = d_gated.cwiseProduct(s.h_prev);
    d_prev += d_gated.cwiseProduct(s.r);

    const Vec<Scalar> d_ar = d_r.cwiseProduct((s.r.array() * (Scalar(1) - s.r.array())).matrix());
    grads.w_r.noalias() += d_ar * s.x.transpose();
    grads.u_r.noalias() += d_ar * s.h_prev.transpose();
    d_x.noalias() += p.w_r.transpose() * d_ar;
    d_prev.noalias() += p.u_r.transpose() * d_ar;

    const Vec<Scalar> d_az = d_z.cwiseProduct((s.z.array() * (Scalar(1) - s.z.array())).matrix());
    grads.w_z.noalias() += d_az * s.x.transpose();
    grads.u_z.noalias() += d_az * s.h_prev.transpose();
    d_x.noalias() += p.w_z.transpose() * d_az;
    d_prev.noalias() += p.u_z.transpose() * d_az;

    if (cfg.use_bias) {
      grads.bias_h.col(0) += d_ah;
      grads.bias_r.col(0) += d_ar;
      grads.bias_z.col(0) += d_az;
    }
    if (!fwd.masks.embed.empty()) d_x = d_x.cwiseProduct(fwd.masks.embed[j]);
    grads.emb.row(prefix[j]) += d_x.transpose();
    d_next = d_prev;
  }
}

/// Exact gradients of the single-example loss.
template <typename Scalar>
GradientSet<Scalar> backward(const NarmParams<Scalar>& p, std::span<const ItemIndex> prefix, ItemIndex label,
                             const ForwardResult<Scalar>& fwd) {
  auto grads = GradientSet<Scalar>::zeros(p.config);
  accumulate_gradients(p, prefix, label, fwd, grads);
  return grads;
}

/// Eval-mode score vector, for ranking.
template <typename Scalar>
Vec<Scalar> score_items(const NarmParams<Scalar>& p, std::span<const ItemIndex> prefix) {
  auto enc = encode(p, prefix);
  session_representation(p, enc);
  return decode(p, enc.c).scores;
}

}  // namespace narm
