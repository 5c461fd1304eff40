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

// Shared test helpers: hand-rolled generators and brute-force oracles that
// deliberately avoid the library code they check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "dcpd.hpp"

namespace dcpd::testing {

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = n(gen);
  return m;
}

inline Matrix uniform(Index rows, Index cols, std::mt19937_64& gen, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(gen);
  return m;
}

inline Matrix unit_columns(Matrix m) {
  for (Index j = 0; j < m.cols(); ++j) m.col(j) /= m.col(j).norm();
  return m;
}

inline Tensor3 random_tensor(Dims d, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(d.size()));
  for (double& x : v) x = n(gen);
  return Tensor3(d, std::move(v));
}

inline Factors random_factors(Dims d, Index R, std::mt19937_64& gen) {
  return {gaussian(d.K, R, gen), gaussian(d.L, R, gen), gaussian(d.M, R, gen)};
}

// T[k,l,m] = sum_r A[k,r] B[l,r] C[m,r], straight from the definition.
inline Tensor3 naive_reconstruct(const Factors& f) {
  Tensor3 t(Dims{f.A.rows(), f.B.rows(), f.C.rows()});
  for (Index k = 0; k < f.A.rows(); ++k)
    for (Index l = 0; l < f.B.rows(); ++l)
      for (Index m = 0; m < f.C.rows(); ++m) {
        double s = 0.0;
        for (Index r = 0; r < f.A.cols(); ++r) s += f.A(k, r) * f.B(l, r) * f.C(m, r);
        t(k, l, m) = s;
      }
  return t;
}

inline double frob(const Tensor3& a, const Tensor3& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Every injective map rows -> columns, maximizing the score sum; ties go to
// the lexicographically smallest map because enumeration is lexicographic
// and only strict improvements replace the incumbent.
struct BruteAssignment {
  std::vector<Index> map;
  double total = -std::numeric_limits<double>::infinity();
};

inline void brute_assign_rec(const Matrix& s, std::vector<Index>& cur, std::vector<char>& used,
                             double acc, BruteAssignment& best) {
  const Index r = static_cast<Index>(cur.size());
  if (r == s.rows()) {
    if (acc > best.total) {
      best.total = acc;
      best.map = cur;
    }
    return;
  }
  for (Index j = 0; j < s.cols(); ++j) {
    if (used[static_cast<std::size_t>(j)]) continue;
    used[static_cast<std::size_t>(j)] = 1;
    cur.push_back(j);
    brute_assign_rec(s, cur, used, acc + s(r, j), best);
    cur.pop_back();
    used[static_cast<std::size_t>(j)] = 0;
  }
}

inline BruteAssignment brute_assignment(const Matrix& score) {
  BruteAssignment best;
  std::vector<Index> cur;
  std::vector<char> used(static_cast<std::size_t>(score.cols()), 0);
  brute_assign_rec(score, cur, used, 0.0, best);
  return best;
}

// Nonnegative quadratic program min x G x^T - 2 x h^T, x >= 0, solved by
// trying every support set: the optimum is the feasible stationary point
// with the lowest objective.
inline Vector enumerate_nnls(const Matrix& g, const Vector& h) {
  const Index n = g.rows();
  Vector best = Vector::Zero(n);
  double best_obj = 0.0;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Index> idx;
    for (Index i = 0; i < n; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const Index p = static_cast<Index>(idx.size());
    Matrix gs(p, p);
    Vector hs(p);
    for (Index a = 0; a < p; ++a) {
      hs(a) = h(idx[static_cast<std::size_t>(a)]);
      for (Index b = 0; b < p; ++b) gs(a, b) = g(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    const Vector xs = gs.fullPivLu().solve(hs);
    if ((xs.array() < 0.0).any()) continue;
    Vector x = Vector::Zero(n);
    for (Index a = 0; a < p; ++a) x(idx[static_cast<std::size_t>(a)]) = xs(a);
    const double obj = x.dot(g * x) - 2.0 * x.dot(h);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

// min over permutations and per-column scalings of |B - Bhat P|^2 / |B|^2,
// by enumerating all R! permutations.
inline double brute_rmse(const Matrix& b, const Matrix& bhat) {
  const Index R = b.cols();
  std::vector<Index> perm(static_cast<std::size_t>(R));
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double err = 0.0;
    for (Index i = 0; i < R; ++i) {
      const Vector x = b.col(i);
      const Vector y = bhat.col(perm[static_cast<std::size_t>(i)]);
      const double yy = y.squaredNorm();
      const double scale = yy > 0.0 ? x.dot(y) / yy : 0.0;
      err += (x - scale * y).squaredNorm();
    }
    best = std::min(best, err);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / b.squaredNorm();
}

// Unit-norm random dictionary whose spark exceeds R (checked by the caller).
inline Dictionary random_unit_dictionary(Index L, Index d, std::mt19937_64& gen) {
  return Dictionary(unit_columns(gaussian(L, d, gen)));
}

// Distinct atom indices drawn uniformly.
inline std::vector<Index> distinct_indices(Index d, Index R, std::mt19937_64& gen) {
  std::vector<Index> all(static_cast<std::size_t>(d));
  std::iota(all.begin(), all.end(), Index{0});
  std::shuffle(all.begin(), all.end(), gen);
  all.resize(static_cast<std::size_t>(R));
  return all;
}

inline Selection positive_selection(std::vector<Index> idx) {
  Selection s;
  s.indices = std::move(idx);
  s.signs.assign(s.indices.size(), 1);
  return s;
}

// Separable pixels x bands data: R pure pixels at random rows, every other
// pixel a random convex combination (flat Dirichlet) of the endmembers,
// plus optional Gaussian noise clamped at zero.
struct SeparableHsi {
  HsiMatrix hsi;
  std::vector<Index> pure;
  Matrix endmembers;  // L x R
};

inline SeparableHsi separable_hsi(Index n, Index L, Index R, double sigma, std::mt19937_64& gen) {
  SeparableHsi out;
  out.endmembers = uniform(L, R, gen, 0.05, 1.0);
  out.pure = distinct_indices(n, R, gen);
  std::exponential_distribution<double> expo(1.0);
  Matrix a(n, R);
  for (Index i = 0; i < n; ++i) {
    for (Index r = 0; r < R; ++r) a(i, r) = expo(gen);
    a.row(i) /= a.row(i).sum();
  }
  for (Index r = 0; r < R; ++r) {
    a.row(out.pure[static_cast<std::size_t>(r)]).setZero();
    a(out.pure[static_cast<std::size_t>(r)], r) = 1.0;
  }
  Matrix m = a * out.endmembers.transpose();
  if (sigma > 0.0) m = (m + sigma * gaussian(n, L, gen)).cwiseMax(0.0);
  out.hsi.values = std::move(m);
  return out;
}

}  // namespace dcpd::testing
