// Copyright 2026 The DCPD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense third-order tensors and the CPD building blocks: unfoldings,
// Khatri-Rao and Hadamard products, reconstruction, noise.
//
// Linear layout is row-major, (k, l, m) -> k*L*M + l*M + m. The unfolding
// column orderings are fixed so that, for T = [[A, B, C]],
//
//   unfold(T, 1) = A * khatri_rao(B, C)^T    column l*M + m
//   unfold(T, 2) = B * khatri_rao(A, C)^T    column k*M + m
//   unfold(T, 3) = C * khatri_rao(A, B)^T    column k*L + l
//
// where khatri_rao(X, Y)(i*q + j, r) = X(i, r) * Y(j, r).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dcpd/error.hpp"

namespace dcpd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Dims {
  Index K = 0;
  Index L = 0;
  Index M = 0;

  Index size() const { return K * L * M; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.K) + "x" + std::to_string(d.L) + "x" +
         std::to_string(d.M);
}

class Tensor3 {
 public:
  Tensor3() = default;

  explicit Tensor3(Dims dims) : dims_(check_dims(dims)), values_(dims.size(), 0.0) {}

  Tensor3(Dims dims, std::vector<double> values)
      : dims_(check_dims(dims)), values_(std::move(values)) {
    if (static_cast<Index>(values_.size()) != dims_.size()) {
      throw ModelError("tensor value count " + std::to_string(values_.size()) +
                       " does not match dims " + to_string(dims_));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw ModelError("tensor has non-finite entries");
    }
  }

  const Dims& dims() const { return dims_; }
  Index K() const { return dims_.K; }
  Index L() const { return dims_.L; }
  Index M() const { return dims_.M; }

  double operator()(Index k, Index l, Index m) const {
    return values_[static_cast<std::size_t>(offset(k, l, m))];
  }
  double& operator()(Index k, Index l, Index m) {
    return values_[static_cast<std::size_t>(offset(k, l, m))];
  }

  const std::vector<double>& values() const { return values_; }

  double squared_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  static Dims check_dims(Dims d) {
    if (d.K <= 0 || d.L <= 0 || d.M <= 0) {
      throw ModelError("tensor dims must be positive, got " + to_string(d));
    }
    return d;
  }

  Index offset(Index k, Index l, Index m) const {
    return (k * dims_.L + l) * dims_.M + m;
  }

  Dims dims_;
  std::vector<double> values_;
};

/// Factor matrices (A, B, C) of a rank-R CPD; all share the column count R.
struct Factors {
  Matrix A;
  Matrix B;
  Matrix C;

  Index rank() const { return A.cols(); }
  Dims dims() const { return {A.rows(), B.rows(), C.rows()}; }

  void validate() const {
    if (A.cols() != B.cols() || A.cols() != C.cols()) {
      throw ModelError("factor column counts differ: " +
                       std::to_string(A.cols()) + ", " +
                       std::to_string(B.cols()) + ", " +
                       std::to_string(C.cols()));
    }
    if (A.cols() < 1) throw ModelError("factors must have rank >= 1");
  }
};

inline void check_mode(int mode) {
  if (mode < 1 || mode > 3) {
    throw ModelError("invalid unfolding mode " + std::to_string(mode) +
                     " (expected 1, 2 or 3)");
  }
}

inline Matrix unfold(const Tensor3& t, int mode) {
  check_mode(mode);
  const Index K = t.K(), L = t.L(), M = t.M();
  Matrix u;
  switch (mode) {
    case 1:
      u.resize(K, L * M);
      for (Index k = 0; k < K; ++k)
        for (Index l = 0; l < L; ++l)
          for (Index m = 0; m < M; ++m) u(k, l * M + m) = t(k, l, m);
      break;
    case 2:
      u.resize(L, K * M);
      for (Index k = 0; k < K; ++k)
        for (Index l = 0; l < L; ++l)
          for (Index m = 0; m < M; ++m) u(l, k * M + m) = t(k, l, m);
      break;
    default:
      u.resize(M, K * L);
      for (Index k = 0; k < K; ++k)
        for (Index l = 0; l < L; ++l)
          for (Index m = 0; m < M; ++m) u(m, k * L + l) = t(k, l, m);
      break;
  }
  return u;
}

inline Tensor3 refold(const Matrix& u, int mode, Dims dims) {
  check_mode(mode);
  Tensor3 t(dims);
  const Index K = dims.K, L = dims.L, M = dims.M;
  const std::array<std::pair<Index, Index>, 3> shapes{
      {{K, L * M}, {L, K * M}, {M, K * L}}};
  const auto [rows, cols] = shapes[static_cast<std::size_t>(mode - 1)];
  if (u.rows() != rows || u.cols() != cols) {
    throw ModelError("cannot refold " + std::to_string(u.rows()) + "x" +
                     std::to_string(u.cols()) + " matrix along mode " +
                     std::to_string(mode) + " into " + to_string(dims));
  }
  for (Index k = 0; k < K; ++k)
    for (Index l = 0; l < L; ++l)
      for (Index m = 0; m < M; ++m) {
        switch (mode) {
          case 1: t(k, l, m) = u(k, l * M + m); break;
          case 2: t(k, l, m) = u(l, k * M + m); break;
          default: t(k, l, m) = u(m, k * L + l); break;
        }
      }
  return t;
}

inline Matrix khatri_rao(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) {
    throw ModelError("khatri_rao: column counts differ (" +
                     std::to_string(x.cols()) + " vs " +
                     std::to_string(y.cols()) + ")");
  }
  const Index p = x.rows(), q = y.rows();
  Matrix out(p * q, x.cols());
  for (Index r = 0; r < x.cols(); ++r)
    for (Index i = 0; i < p; ++i)
      out.col(r).segment(i * q, q) = x(i, r) * y.col(r);
  return out;
}

inline Matrix hadamard(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ModelError("hadamard: shape mismatch");
  }
  return x.cwiseProduct(y);
}

inline Tensor3 cpd_reconstruct(const Factors& f) {
  f.validate();
  const Dims dims = f.dims();
  // Mode-1 unfolding of the model, refolded.
  const Matrix u = f.A * khatri_rao(f.B, f.C).transpose();
  return refold(u, 1, dims);
}

inline double rel_frob_err(const Tensor3& t, const Tensor3& that) {
  if (!(t.dims() == that.dims())) {
    throw ModelError("rel_frob_err: dims differ (" + to_string(t.dims()) +
                     " vs " + to_string(that.dims()) + ")");
  }
  const double ref = t.squared_norm();
  if (ref == 0.0) throw ModelError("rel_frob_err: reference tensor has zero norm");
  double diff = 0.0;
  for (std::size_t i = 0; i < t.values().size(); ++i) {
    const double e = t.values()[i] - that.values()[i];
    diff += e * e;
  }
  return std::sqrt(diff / ref);
}

struct NoisyTensor {
  Tensor3 tensor;
  double snr_db = std::numeric_limits<double>::infinity();
};

/// Adds i.i.d. N(0, sigma^2) noise drawn from a std::mt19937_64 seeded with
/// `seed`. The realized SNR is 10 log10(|T|^2 / |E|^2).
inline NoisyTensor add_gaussian_noise(const Tensor3& t, double sigma,
                                      std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ModelError("noise sigma must be nonnegative");
  if (sigma == 0.0) return {t, std::numeric_limits<double>::infinity()};
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> values = t.values();
  double noise = 0.0;
  for (double& v : values) {
    const double e = normal(gen);
    noise += e * e;
    v += e;
  }
  const double snr = noise > 0.0
                         ? 10.0 * std::log10(t.squared_norm() / noise)
                         : std::numeric_limits<double>::infinity();
  return {Tensor3(t.dims(), std::move(values)), snr};
}

}  // namespace dcpd
