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
#include <narm/model.hpp>

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace narm;

namespace {

ModelConfig tiny(Index m = 7, Index d = 2, Index h = 3, Variant v = Variant::kHybrid) {
  return ModelConfig{.n_items = m, .embed_dim = d, .hidden_dim = h, .truncation = 19, .variant = v};
}

Params random_params(const ModelConfig& cfg, std::uint64_t seed) {
  RngState rng(seed);
  return init_params(cfg, rng, {.embed_bound = 0.8, .weight_scale = 1.5});
}

VecX random_vec(RngState& rng, Index n) { return uniform_init<double>(rng, n, 1, 1.0).col(0); }

using Vd = std::vector<double>;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y_i = sum_k M(i, k) * x_k, element by element.
Vd mv(const MatX& m, const Vd& x) {
  Vd y(m.rows(), 0.0);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index k = 0; k < m.cols(); ++k) y[i] += m(i, k) * x[k];
  return y;
}

Vd to_std(const VecX& v) { return Vd(v.data(), v.data() + v.size()); }

Vd gru_oracle(const Params& p, const Vd& x, const Vd& h) {
  const Vd wz = mv(p.w_z, x), uz = mv(p.u_z, h), wr = mv(p.w_r, x), ur = mv(p.u_r, h);
  const std::size_t n = h.size();
  Vd z(n), r(n), rh(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = sig(wz[i] + uz[i]);
    r[i] = sig(wr[i] + ur[i]);
    rh[i] = r[i] * h[i];
  }
  const Vd wx = mv(p.w_h, x), urh = mv(p.u_h, rh);
  Vd out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (1.0 - z[i]) * h[i] + z[i] * std::tanh(wx[i] + urh[i]);
  return out;
}

double attention_oracle(const Params& p, const Vd& ht, const Vd& hj) {
  const Vd a = mv(p.a1, ht), b = mv(p.a2, hj);
  double q = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) q += p.v(i, 0) * sig(a[i] + b[i]);
  return q;
}

void check_close(const VecX& a, const Vd& b, double tol) {
  REQUIRE(a.size() == static_cast<Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol).scale(1.0));
}

// Full eval-mode probabilities recomputed from the component oracles.
Vd probs_oracle(const Params& p, const Prefix& prefix) {
  Vd h(p.config.hidden_dim, 0.0);
  std::vector<Vd> hs;
  for (ItemIndex i : prefix) {
    h = gru_oracle(p, to_std(p.emb.row(i).transpose()), h);
    hs.push_back(h);
  }
  Vd local(h.size(), 0.0);
  for (const auto& hj : hs) {
    const double a = attention_oracle(p, hs.back(), hj);
    for (std::size_t k = 0; k < h.size(); ++k) local[k] += a * hj[k];
  }
  Vd c = hs.back();
  c.insert(c.end(), local.begin(), local.end());
  const Vd bc = mv(p.b, c);
  Vd s(p.config.n_items);
  for (Index i = 0; i < p.config.n_items; ++i) {
    s[i] = 0.0;
    for (Index k = 0; k < p.config.embed_dim; ++k) s[i] += p.emb(i + 1, k) * bc[k];
  }
  long double mx = s[0], z = 0;
  for (double x : s) mx = std::max<long double>(mx, x);
  for (double x : s) z += std::exp(static_cast<long double>(x) - mx);
  Vd out;
  for (double x : s) out.push_back(static_cast<double>(std::exp(static_cast<long double>(x) - mx) / z));
  return out;
}

}  // namespace

TEST_CASE("gru_step") {
  const auto cfg = tiny(7, 2, 3);
  SUBCASE("zero weights halve the previous state") {
    const auto p = Params::zeros(cfg);
    const VecX x = VecX::Constant(2, 3.0), h = (VecX(3) << 1.0, -2.0, 4.0).finished();
    CHECK(gru_step(p, x, h).isApprox(0.5 * h, 1e-15));
    CHECK(gru_step(p, x, VecX(VecX::Zero(3))).isZero(0.0));
  }
  SUBCASE("scalar-loop oracle") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto p = random_params(cfg, seed);
      RngState rng(seed + 100);
      const VecX x = random_vec(rng, 2), h = random_vec(rng, 3);
      check_close(gru_step(p, x, h), gru_oracle(p, to_std(x), to_std(h)), 1e-12);
    }
  }
  SUBCASE("shape mismatch") {
    const auto p = Params::zeros(cfg);
    CHECK_THROWS_AS(gru_step(p, VecX(VecX::Zero(3)), VecX(VecX::Zero(3))), DimensionError);
    CHECK_THROWS_AS(gru_step(p, VecX(VecX::Zero(2)), VecX(VecX::Zero(2))), DimensionError);
  }
}

TEST_CASE("encode") {
  const auto p = random_params(tiny(), 3);
  const Prefix one{4};
  CHECK(encode(p, std::span<const ItemIndex>(one)).length() == 1);

  const Prefix four{3, 1, 7, 3};
  const auto enc = encode(p, std::span<const ItemIndex>(four));
  REQUIRE(enc.length() == 4);
  VecX h = VecX(VecX::Zero(3));
  for (int j = 0; j < 4; ++j) {
    h = gru_step(p, VecX(p.emb.row(four[j]).transpose()), h);
    CHECK(enc.hidden[j] == h);
  }
  const auto again = encode(p, std::span<const ItemIndex>(four));
  for (int j = 0; j < 4; ++j) CHECK(again.hidden[j] == enc.hidden[j]);

  SUBCASE("length equivariance") {
    Prefix longer = four;
    longer.push_back(2);
    const auto ext = encode(p, std::span<const ItemIndex>(longer));
    for (int j = 0; j < 4; ++j) CHECK(ext.hidden[j] == enc.hidden[j]);
  }

  const Prefix empty{}, zero{0}, big{8};
  CHECK_THROWS(encode(p, std::span<const ItemIndex>(empty)));
  CHECK_THROWS(encode(p, std::span<const ItemIndex>(zero)));
  CHECK_THROWS(encode(p, std::span<const ItemIndex>(big)));
  auto short_cfg = tiny();
  short_cfg.truncation = 3;
  CHECK_THROWS(encode(Params::zeros(short_cfg), std::span<const ItemIndex>(four)));
}

TEST_CASE("attention_score") {
  const auto cfg = tiny(7, 2, 4);
  auto p = Params::zeros(cfg);
  RngState rng(8);
  const VecX a = random_vec(rng, 4), b = random_vec(rng, 4);
  CHECK(attention_score(p, a, b) == 0.0);
  p.v.setOnes();
  CHECK(attention_score(p, a, b) == doctest::Approx(4 * 0.5).epsilon(1e-15));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto q = random_params(cfg, seed);
    CHECK(attention_score(q, a, b) == doctest::Approx(attention_oracle(q, to_std(a), to_std(b))).epsilon(1e-12));
  }
}

TEST_CASE("local_feature and session_representation") {
  auto p = random_params(tiny(), 11);
  SUBCASE("single step") {
    const Prefix pre{5};
    auto enc = encode(p, std::span<const ItemIndex>(pre));
    const VecX c_local = local_feature(p, enc);
    REQUIRE(enc.attention_weights.size() == 1);
    CHECK(c_local.isApprox(enc.attention_weights[0] * enc.hidden[0], 1e-15));
  }
  SUBCASE("three-term weighted sum") {
    const Prefix pre{5, 2, 6};
    auto enc = encode(p, std::span<const ItemIndex>(pre));
    const VecX c_local = local_feature(p, enc);
    Vd expect(3, 0.0);
    for (int j = 0; j < 3; ++j) {
      const double a = attention_oracle(p, to_std(enc.hidden[2]), to_std(enc.hidden[j]));
      CHECK(enc.attention_weights[j] == doctest::Approx(a).epsilon(1e-12));
      for (int k = 0; k < 3; ++k) expect[k] += a * enc.hidden[j][k];
    }
    check_close(c_local, expect, 1e-12);
  }
  SUBCASE("softmax flag normalizes the weights") {
    auto q = p;
    q.config.attention_softmax = true;
    const Prefix pre{1, 2, 3, 4};
    auto enc = encode(q, std::span<const ItemIndex>(pre));
    local_feature(q, enc);
    CHECK(enc.attention_weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((enc.attention_weights.array() > 0).all());
  }
  SUBCASE("representation halves") {
    const Prefix pre{1, 2, 3, 4, 5};
    auto enc = encode(p, std::span<const ItemIndex>(pre));
    session_representation(p, enc);
    REQUIRE(enc.c.size() == 6);
    CHECK(enc.c.head(3) == enc.hidden.back());
    auto fresh = encode(p, std::span<const ItemIndex>(pre));
    CHECK(enc.c.tail(3) == local_feature(p, fresh));
  }
  SUBCASE("v = 0 leaves only the global half") {
    p.v.setZero();
    const Prefix pre{3};
    auto enc = encode(p, std::span<const ItemIndex>(pre));
    session_representation(p, enc);
    CHECK(enc.c.head(3) == enc.hidden[0]);
    CHECK(enc.c.tail(3).isZero(0.0));
  }
}

TEST_CASE("decode") {
  SUBCASE("B = 0 gives uniform probabilities") {
    auto p = random_params(tiny(), 2);
    p.b.setZero();
    const auto pred = decode(p, VecX(VecX::Ones(6)));
    CHECK((pred.probs.array() - 1.0 / 7).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("orthogonal rows") {
    auto p = Params::zeros(tiny(2, 2, 1));
    p.b(0, 0) = 1.0;  // B c = (c_0, 0)
    p.emb.row(1) << 0.0, 1.0;
    p.emb.row(2) << 2.0, 0.0;
    const auto pred = decode(p, (VecX(2) << 2.0, 0.0).finished());
    CHECK(pred.scores[0] == 0.0);
    CHECK(pred.scores[1] == 4.0);
    CHECK(pred.probs[1] > pred.probs[0]);
  }
  SUBCASE("explicit dot products") {
    const auto p = random_params(tiny(7, 2, 3), 14);
    RngState rng(1);
    const VecX c = random_vec(rng, 6);
    const auto pred = decode(p, c);
    const VecX bc = p.b * c;
    for (Index i = 0; i < 7; ++i) {
      double s = 0;
      for (Index k = 0; k < 2; ++k) s += p.emb(i + 1, k) * bc[k];
      CHECK(pred.scores[i] == doctest::Approx(s).epsilon(1e-12));
    }
    CHECK(pred.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  const auto p = Params::zeros(tiny());
  CHECK_THROWS_AS(decode(p, VecX(VecX::Zero(3))), DimensionError);
}

TEST_CASE("loss") {
  Prediction<double> uniform;
  uniform.probs = VecX::Constant(9, 1.0 / 9);
  CHECK(loss(uniform, 4) == doctest::Approx(std::log(9.0)).epsilon(1e-14));
  Prediction<double> sure;
  sure.probs = VecX(VecX::Zero(3));
  sure.probs[1] = 1.0;
  CHECK(loss(sure, 2) == 0.0);
  CHECK(std::isfinite(loss(sure, 1)));
  CHECK(loss(sure, 1) == doctest::Approx(-std::log(std::numeric_limits<double>::min())));
  CHECK_THROWS(loss(sure, 0));
  CHECK_THROWS(loss(sure, 4));

  Prediction<double> rnd;
  rnd.probs = softmax(VecX((VecX(4) << 0.3, -1.2, 2.0, 0.1).finished()));
  for (ItemIndex label = 1; label <= 4; ++label) {
    double ce = 0;
    for (Index i = 0; i < 4; ++i) ce -= (i == label - 1 ? 1.0 : 0.0) * std::log(rnd.probs[i]);
    CHECK(loss(rnd, label) == doctest::Approx(ce).epsilon(1e-14));
  }
}

TEST_CASE("forward") {
  const auto p = random_params(tiny(), 21);
  const Prefix pre{2, 4, 6};
  const auto a = forward(p, std::span<const ItemIndex>(pre), 5);
  const auto b = forward(p, std::span<const ItemIndex>(pre), 5);
  CHECK(a.loss == b.loss);
  CHECK(a.prediction.probs == b.prediction.probs);
  CHECK(a.masks.empty());

  const Vd oracle = probs_oracle(p, pre);
  check_close(a.prediction.probs, oracle, 1e-12);
  CHECK(a.loss == doctest::Approx(-std::log(oracle[4])).epsilon(1e-12));

  RngState rng(3);
  const auto no_drop = forward(p, std::span<const ItemIndex>(pre), 5, Mode::kTrain, &rng, {0.0, 0.0});
  CHECK(no_drop.loss == a.loss);

  RngState r1(9), r2(9);
  const auto d1 = forward(p, std::span<const ItemIndex>(pre), 5, Mode::kTrain, &r1);
  const auto d2 = forward(p, std::span<const ItemIndex>(pre), 5, Mode::kTrain, &r2);
  CHECK(d1.loss == d2.loss);
  REQUIRE(d1.masks.embed.size() == 3);
  CHECK(d1.masks.repr.size() == 6);
  const auto replay = forward_with_masks(p, std::span<const ItemIndex>(pre), 5, d1.masks);
  CHECK(replay.loss == d1.loss);

  CHECK_THROWS(forward(p, std::span<const ItemIndex>(pre), 0));
  CHECK_THROWS(forward(p, std::span<const ItemIndex>(pre), 5, Mode::kTrain, nullptr));
}

TEST_CASE("probability invariants") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RngState rng(seed);
    const auto p = init_params(tiny(13, 4, 5), rng, {.embed_bound = 2.0, .weight_scale = 3.0});
    Prefix pre(1 + rng.uniform_index(8));
    for (auto& i : pre) i = static_cast<ItemIndex>(1 + rng.uniform_index(13));
    const auto f = forward(p, std::span<const ItemIndex>(pre), 1);
    CHECK(std::abs(f.prediction.probs.sum() - 1.0) < 1e-9);
    CHECK((f.prediction.probs.array() > 0).all());
    const VecX shifted = softmax(VecX(f.prediction.scores.array() + 37.5));
    CHECK((shifted - f.prediction.probs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("ablation consistency") {
  const auto hybrid_cfg = tiny(9, 3, 4);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto hybrid = random_params(hybrid_cfg, seed);
    hybrid.v.setZero();
    hybrid.b.rightCols(4).setZero();
    auto global = Params::zeros(tiny(9, 3, 4, Variant::kGlobal));
    global.for_each_block([&](std::string_view name, MatX& m) {
      hybrid.for_each_block([&](std::string_view other, const MatX& src) {
        if (name == other && name != "B") m = src;
      });
    });
    global.b = hybrid.b.leftCols(4);
    const Prefix pre{1, 5, 9, 2};
    const auto a = forward(hybrid, std::span<const ItemIndex>(pre), 3);
    const auto b = forward(global, std::span<const ItemIndex>(pre), 3);
    CHECK((a.prediction.probs - b.prediction.probs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("backward") {
  const Prefix pre{3, 1, 3};
  SUBCASE("padding row and unused rows receive no gradient") {
    const auto p = random_params(tiny(11, 4, 5), 6);
    const auto f = forward(p, std::span<const ItemIndex>(pre), 2);
    const auto g = backward(p, std::span<const ItemIndex>(pre), 2, f);
    CHECK(g.emb.row(0).isZero(0.0));
    CHECK(g.same_shape(p));
  }
  SUBCASE("B = 0 blocks every path except B itself") {
    auto p = random_params(tiny(11, 4, 5), 6);
    p.b.setZero();
    const auto f = forward(p, std::span<const ItemIndex>(pre), 2);
    const auto g = backward(p, std::span<const ItemIndex>(pre), 2, f);
    g.for_each_block([](std::string_view name, const MatX& m) {
      if (name == "B") {
        CHECK_FALSE(m.isZero(0.0));
      } else {
        INFO(name);
        CHECK(m.isZero(0.0));
      }
    });
  }
  SUBCASE("v = 0 stops the A1 and A2 gradients") {
    auto p = random_params(tiny(11, 4, 5), 6);
    p.v.setZero();
    auto f = forward(p, std::span<const ItemIndex>(pre), 2);
    auto g = backward(p, std::span<const ItemIndex>(pre), 2, f);
    CHECK(g.a1.isZero(0.0));
    CHECK(g.a2.isZero(0.0));
    CHECK_FALSE(g.v.isZero(0.0));  // dL/dv = sum_j (h_j . dL/dc_local) sigma_j
    p.b.rightCols(5).setZero();
    f = forward(p, std::span<const ItemIndex>(pre), 2);
    g = backward(p, std::span<const ItemIndex>(pre), 2, f);
    CHECK(g.v.isZero(0.0));
  }
  SUBCASE("weight scales linearly") {
    const auto p = random_params(tiny(11, 4, 5), 8);
    const auto f = forward(p, std::span<const ItemIndex>(pre), 9);
    const auto g = backward(p, std::span<const ItemIndex>(pre), 9, f);
    auto g3 = Gradients::zeros(p.config);
    accumulate_gradients(p, std::span<const ItemIndex>(pre), 9, f, g3, 3.0);
    CHECK(g3.b.isApprox(3.0 * g.b, 1e-14));
    CHECK(g3.u_z.isApprox(3.0 * g.u_z, 1e-14));
  }
}

TEST_CASE("finite-difference gradient check") {
  SUBCASE("default literal model, 20 seeds") {
    const auto report = run_gradcheck({});
    CHECK(report.passed);
    CHECK(report.max_rel_error <= 1e-5);
    CHECK(report.blocks.size() == 11);
  }
  SUBCASE("ablation variants") {
    for (Variant v : {Variant::kGlobal, Variant::kLocal}) {
      GradcheckOptions o;
      o.model.variant = v;
      o.seeds = 5;
      CHECK(run_gradcheck(o).max_rel_error <= 1e-5);
    }
  }
  SUBCASE("bias terms") {
    GradcheckOptions o;
    o.model.use_bias = true;
    o.seeds = 5;
    const auto r = run_gradcheck(o);
    CHECK(r.blocks.size() == 16);
    CHECK(r.max_rel_error <= 1e-5);
  }
  SUBCASE("softmax attention and dropout") {
    GradcheckOptions o;
    o.model.attention_softmax = true;
    o.seeds = 5;
    o.scale_floor = 1e-4;
    CHECK(run_gradcheck(o).max_rel_error <= 1e-5);
    GradcheckOptions d;
    d.with_dropout = true;
    d.seeds = 5;
    d.scale_floor = 1e-4;
    CHECK(run_gradcheck(d).max_rel_error <= 1e-5);
  }
  SUBCASE("a corrupted gradient is caught") {
    GradcheckOptions o;
    o.corrupt = true;
    o.seeds = 2;
    CHECK_FALSE(run_gradcheck(o).passed);
  }
}

TEST_CASE("single precision instantiation") {
  RngState rng(1);
  const auto p = init_params<float>(tiny(), rng);
  const Prefix pre{1, 2};
  const auto f = forward(p, std::span<const ItemIndex>(pre), 3);
  CHECK(std::abs(f.prediction.probs.sum() - 1.0f) < 1e-5f);
  const auto g = backward(p, std::span<const ItemIndex>(pre), 3, f);
  CHECK(g.emb.row(0).isZero(0.0f));
}
