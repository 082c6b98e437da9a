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

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace narm {

/// Row-major dense matrix, the carrier for every weight and activation.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatX = Mat<double>;
using VecX = Vec<double>;
using Index = Eigen::Index;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) +
                         " vs " + shape_str(b.rows(), b.cols()));
  }
}

}  // namespace detail

/// Deterministic generator. The mt19937_64 output sequence is fixed by the
/// C++ standard; all derived draws below use only raw 64-bit outputs so the
/// stream is identical on every platform (std distributions are not).
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= threshold) return x % n;
    }
  }

  /// Standard normal via Box-Muller on uniform01.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// In-place Fisher-Yates shuffle.
  template <typename RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = uniform_index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

template <typename DA, typename DB>
auto matmul(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + detail::shape_str(a.rows(), a.cols()) +
                         " x " + detail::shape_str(b.rows(), b.cols()));
  }
  Mat<Scalar> out = a * b;
  return out;
}

template <typename DA, typename DB>
auto add(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a, b, "add");
  return (a + b).eval();
}

template <typename DA, typename DB>
auto sub(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a, b, "sub");
  return (a - b).eval();
}

template <typename DA, typename DB>
auto hadamard(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a, b, "hadamard");
  return a.cwiseProduct(b).eval();
}

template <typename D>
auto scale(const Eigen::MatrixBase<D>& a, typename D::Scalar s) {
  return (a * s).eval();
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename D>
auto sigmoid(const Eigen::MatrixBase<D>& a) {
  using Scalar = typename D::Scalar;
  return a.unaryExpr([](Scalar x) { return sigmoid(x); }).eval();
}

template <typename D>
auto tanh_activation(const Eigen::MatrixBase<D>& a) {
  return a.array().tanh().matrix().eval();
}

/// Numerically stable softmax of a vector (max-subtracted).
template <typename D>
auto softmax(const Eigen::MatrixBase<D>& v) {
  using Scalar = typename D::Scalar;
  if (v.size() == 0) throw DimensionError("softmax: empty input");
  if (v.rows() != 1 && v.cols() != 1) throw DimensionError("softmax: input is not a vector");
  const Mat<Scalar> x = v;
  const Scalar mx = x.maxCoeff();
  Vec<Scalar> e(x.size());
  for (Index i = 0; i < x.size(); ++i) e[i] = std::exp(x.data()[i] - mx);
  e /= e.sum();
  return e;
}

/// Vertical stack [a; b].
template <typename DA, typename DB>
auto concat_rows(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  if (a.rows() == 0) return Mat<Scalar>(b);
  if (b.rows() == 0) return Mat<Scalar>(a);
  if (a.cols() != b.cols()) {
    throw DimensionError("concat_rows: column mismatch " + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()));
  }
  Mat<Scalar> out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

/// Inverted-dropout mask: 0 with probability 1 - keep_prob, else 1 / keep_prob.
template <typename Scalar = double>
Mat<Scalar> dropout_mask(RngState& rng, Index rows, Index cols, double keep_prob) {
  if (!(keep_prob > 0.0) || keep_prob > 1.0) {
    throw std::invalid_argument("dropout_mask: keep_prob must lie in (0, 1]");
  }
  Mat<Scalar> m(rows, cols);
  const Scalar kept = Scalar(1.0 / keep_prob);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform01() < keep_prob ? kept : Scalar(0);
  return m;
}

/// I.i.d. uniform entries on [-bound, bound].
template <typename Scalar = double>
Mat<Scalar> uniform_init(RngState& rng, Index rows, Index cols, double bound) {
  if (!(bound > 0.0)) throw std::invalid_argument("uniform_init: bound must be positive");
  Mat<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = Scalar(bound * (2.0 * rng.uniform01() - 1.0));
  return m;
}

template <typename D>
bool all_finite(const Eigen::MatrixBase<D>& a) {
  return a.allFinite();
}

/// Central-difference gradient of f at params, one coordinate at a time.
template <typename Scalar>
Mat<Scalar> finite_difference_grad(const std::function<Scalar(const Mat<Scalar>&)>& f,
                                   const Mat<Scalar>& params, Scalar eps) {
  if (!(eps > Scalar(0))) throw std::invalid_argument("finite_difference_grad: eps must be positive");
  Mat<Scalar> grad(params.rows(), params.cols());
  Mat<Scalar> probe = params;
  for (Index i = 0; i < probe.size(); ++i) {
    const Scalar saved = probe.data()[i];
    probe.data()[i] = saved + eps;
    const Scalar up = f(probe);
    probe.data()[i] = saved - eps;
    const Scalar down = f(probe);
    probe.data()[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("finite_difference_grad: non-finite function value at coordinate " +
                              std::to_string(i));
    }
    grad.data()[i] = (up - down) / (Scalar(2) * eps);
  }
  return grad;
}

}  // namespace narm
