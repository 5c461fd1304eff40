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

// Shared numerical kernels: Gram-system solves, nonnegative least squares,
// rectangular assignment, spectral norm and a brute-force spark.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "dcpd/error.hpp"
#include "dcpd/random.hpp"
#include "dcpd/tensor.hpp"

namespace dcpd {

namespace detail {

// Solves X * G = RHS for symmetric G, i.e. G * X^T = RHS^T.
inline Matrix solve_symmetric(const Matrix& g, const Matrix& rhs_t) {
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() == Eigen::Success) return llt.solve(rhs_t);
  const double ridge = 1e-12 * g.trace() / static_cast<double>(g.rows());
  Matrix ridged = g;
  ridged.diagonal().array() += ridge;
  llt.compute(ridged);
  if (llt.info() == Eigen::Success && ridge > 0.0) return llt.solve(rhs_t);
  return g.completeOrthogonalDecomposition().solve(rhs_t);
}

}  // namespace detail

/// Returns X minimizing |X G - RHS|_F for a symmetric R x R Gram matrix G.
/// Uses a Cholesky factorization, retried with a ridge of 1e-12 tr(G)/R.
inline Matrix solve_gram(const Matrix& gram, const Matrix& rhs) {
  if (gram.rows() != gram.cols() || gram.cols() != rhs.cols()) {
    throw ModelError("solve_gram: expected R x R Gram and n x R right-hand side");
  }
  if (gram.isZero(0.0)) throw NumericalError("degenerate Gram matrix");
  if (!gram.allFinite() || !rhs.allFinite()) {
    throw NumericalError("solve_gram: non-finite input");
  }
  return detail::solve_symmetric(gram, rhs.transpose()).transpose();
}

struct NnlsOptions {
  int max_iter_factor = 10;  // cap = factor * R + 10 passive-set changes
};

/// Row-wise nonnegative least squares in Gram form: each row x of the result
/// minimizes x G x^T - 2 x h^T subject to x >= 0, where h is the matching
/// row of H. Lawson-Hanson active set on the normal equations.
inline Matrix nnls(const Matrix& gram, const Matrix& rhs, NnlsOptions opts = {}) {
  const Index R = gram.rows();
  if (gram.cols() != R || rhs.cols() != R) {
    throw ModelError("nnls: expected R x R Gram and n x R right-hand side");
  }
  Matrix out = Matrix::Zero(rhs.rows(), R);
  const double scale =
      std::max({1.0, gram.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff()});
  const double tol = 1e-13 * scale;
  const int cap = opts.max_iter_factor * static_cast<int>(R) + 10;

  std::vector<Index> idx;
  std::vector<char> passive(static_cast<std::size_t>(R));
  std::vector<char> blocked(static_cast<std::size_t>(R));
  for (Index row = 0; row < rhs.rows(); ++row) {
    const Vector h = rhs.row(row).transpose();
    Vector x = Vector::Zero(R);
    std::fill(passive.begin(), passive.end(), 0);
    std::fill(blocked.begin(), blocked.end(), 0);
    Vector w = h;
    int iter = 0;
    while (true) {
      Index enter = -1;
      double best = tol;
      for (Index j = 0; j < R; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (!passive[uj] && !blocked[uj] && w(j) > best) {
          best = w(j);
          enter = j;
        }
      }
      if (enter < 0) break;
      passive[static_cast<std::size_t>(enter)] = 1;

      while (true) {
        if (++iter > cap) {
          throw NumericalError("nnls: iteration cap reached",
                               (gram * x - h).norm());
        }
        idx.clear();
        for (Index j = 0; j < R; ++j)
          if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        const auto np = static_cast<Index>(idx.size());
        if (np == 0) break;
        Matrix gp(np, np);
        Vector hp(np);
        for (Index a = 0; a < np; ++a) {
          hp(a) = h(idx[static_cast<std::size_t>(a)]);
          for (Index b = 0; b < np; ++b)
            gp(a, b) = gram(idx[static_cast<std::size_t>(a)],
                            idx[static_cast<std::size_t>(b)]);
        }
        const Vector zp = detail::solve_symmetric(gp, hp);
        Vector z = Vector::Zero(R);
        for (Index a = 0; a < np; ++a) z(idx[static_cast<std::size_t>(a)]) = zp(a);

        double alpha = 1.0;
        Index leave = -1;
        for (Index j : idx) {
          if (z(j) <= 0.0) {
            const double denom = x(j) - z(j);
            const double ratio = denom > 0.0 ? x(j) / denom : 0.0;
            if (leave < 0 || ratio < alpha) {
              alpha = ratio;
              leave = j;
            }
          }
        }
        if (leave < 0) {
          x = z;
          break;
        }
        x += alpha * (z - x);
        x(leave) = 0.0;
        for (Index j : idx) {
          if (x(j) <= 0.0) {
            x(j) = 0.0;
            passive[static_cast<std::size_t>(j)] = 0;
          }
        }
      }
      // A variable that could not leave zero stays out until x moves again.
      if (!passive[static_cast<std::size_t>(enter)]) {
        blocked[static_cast<std::size_t>(enter)] = 1;
      } else {
        std::fill(blocked.begin(), blocked.end(), 0);
      }
      w = h - gram * x;
    }
    out.row(row) = x.transpose();
  }
  return out;
}

// --- Assignment -------------------------------------------------------------

struct AssignmentResult {
  std::vector<Index> column_to_atom;  ///< row r of the score matrix -> column
  double total_score = 0.0;
};

namespace detail {

struct HungarianSolution {
  std::vector<Index> row_to_col;
  double cost = 0.0;
  std::vector<double> u;  // row potentials
  std::vector<double> v;  // column potentials
};

// Min-cost assignment of every row of an n x m cost matrix (n <= m) to a
// distinct column, shortest augmenting path with potentials.
inline HungarianSolution hungarian_min(const Matrix& cost) {
  const Index n = cost.rows(), m = cost.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(m + 1), 0);
  std::vector<Index> way(static_cast<std::size_t>(m + 1), 0);
  std::vector<double> minv(static_cast<std::size_t>(m + 1));
  std::vector<char> used(static_cast<std::size_t>(m + 1));
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= m; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[uj];
        if (cur < minv[uj]) {
          minv[uj] = cur;
          way[uj] = j0;
        }
        if (minv[uj] < delta) {
          delta = minv[uj];
          j1 = j;
        }
      }
      for (Index j = 0; j <= m; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) {
          u[static_cast<std::size_t>(p[uj])] += delta;
          v[uj] -= delta;
        } else {
          minv[uj] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  HungarianSolution sol;
  sol.row_to_col.assign(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= m; ++j) {
    const Index i = p[static_cast<std::size_t>(j)];
    if (i > 0) sol.row_to_col[static_cast<std::size_t>(i - 1)] = j - 1;
  }
  for (Index i = 0; i < n; ++i)
    sol.cost += cost(i, sol.row_to_col[static_cast<std::size_t>(i)]);
  sol.u.assign(u.begin() + 1, u.end());
  sol.v.assign(v.begin() + 1, v.end());
  return sol;
}

}  // namespace detail

/// Injective assignment of the R rows of `score` to distinct columns that
/// maximizes the total score. Among optimal assignments the lexicographically
/// smallest one (row 0 first) is returned.
inline AssignmentResult assignment_max(const Matrix& score) {
  const Index R = score.rows(), d = score.cols();
  if (d < R) {
    throw ModelError("assignment_max: need at least as many atoms (" +
                     std::to_string(d) + ") as columns (" + std::to_string(R) +
                     ")");
  }
  AssignmentResult res;
  if (R == 0) return res;
  if (!score.allFinite()) throw NumericalError("assignment_max: non-finite scores");

  const double tol =
      1e-10 * std::max(1.0, score.cwiseAbs().maxCoeff() * static_cast<double>(R));
  std::vector<char> taken(static_cast<std::size_t>(d), 0);
  res.column_to_atom.assign(static_cast<std::size_t>(R), -1);

  // Subproblem: rows [first, R), columns not yet taken.
  auto solve_sub = [&](Index first, std::vector<Index>& cols) {
    cols.clear();
    for (Index j = 0; j < d; ++j)
      if (!taken[static_cast<std::size_t>(j)]) cols.push_back(j);
    Matrix cost(R - first, static_cast<Index>(cols.size()));
    for (Index i = first; i < R; ++i)
      for (Index c = 0; c < cost.cols(); ++c)
        cost(i - first, c) = -score(i, cols[static_cast<std::size_t>(c)]);
    return detail::hungarian_min(cost);
  };

  std::vector<Index> cols, sub_cols;
  for (Index i = 0; i < R; ++i) {
    const detail::HungarianSolution sol = solve_sub(i, cols);
    const Index chosen_pos = sol.row_to_col[0];
    Index pick = cols[static_cast<std::size_t>(chosen_pos)];
    // Only tight edges can belong to an optimal assignment.
    for (Index c = 0; c < chosen_pos; ++c) {
      const double reduced = -score(i, cols[static_cast<std::size_t>(c)]) -
                             sol.u[0] - sol.v[static_cast<std::size_t>(c)];
      if (reduced > tol) continue;
      const Index j = cols[static_cast<std::size_t>(c)];
      double rest = 0.0;
      if (i + 1 < R) {
        taken[static_cast<std::size_t>(j)] = 1;
        rest = solve_sub(i + 1, sub_cols).cost;
        taken[static_cast<std::size_t>(j)] = 0;
      }
      if (-score(i, j) + rest <= sol.cost + tol) {
        pick = j;
        break;
      }
    }
    taken[static_cast<std::size_t>(pick)] = 1;
    res.column_to_atom[static_cast<std::size_t>(i)] = pick;
    res.total_score += score(i, pick);
  }
  return res;
}

// --- Spectral norm ----------------------------------------------------------

/// Largest singular value by power iteration on M^T M (relative tolerance
/// 1e-10 on the eigenvalue estimate, at most 500 iterations).
inline double spectral_norm(const Matrix& m, double rel_tol = 1e-10,
                            int max_iter = 500) {
  if (m.size() == 0) throw ModelError("spectral_norm: empty matrix");
  Rng gen = make_rng(0x5eed, m.cols());
  Vector v = random_normal(m.cols(), 1, gen).col(0);
  v.normalize();
  double prev = (m * v).squaredNorm();
  if (prev == 0.0) {
    if (m.isZero(0.0)) return 0.0;
  }
  for (int it = 0; it < max_iter; ++it) {
    Vector w = m.transpose() * (m * v);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    const double cur = (m * v).squaredNorm();
    if (std::abs(cur - prev) <= rel_tol * cur) return std::sqrt(cur);
    prev = cur;
  }
  throw NumericalError("spectral_norm: power iteration did not converge");
}

// --- Spark ------------------------------------------------------------------

inline constexpr double kSparkSubsetBudget = 1e6;

inline double binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (Index i = 1; i <= k; ++i)
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

/// Smallest k <= kmax such that some k columns of D are linearly dependent,
/// or nullopt when every subset up to kmax has full column rank.
inline std::optional<Index> spark_bruteforce(const Matrix& dict, Index kmax) {
  const Index L = dict.rows(), d = dict.cols();
  if (kmax < 1 || kmax > std::min(L + 1, d)) {
    throw ModelError("spark: kmax must lie in [1, min(L+1, d)] = [1, " +
                     std::to_string(std::min(L + 1, d)) + "]");
  }
  const Matrix gram = dict.transpose() * dict;
  auto column_rank = [&](Matrix& sub, const std::vector<Index>& cols) {
    for (Index i = 0; i < sub.cols(); ++i) sub.col(i) = dict.col(cols[static_cast<std::size_t>(i)]);
    const Vector sv = Eigen::JacobiSVD<Matrix>(sub).singularValues();
    const double smax = sv(0);
    if (smax == 0.0) return Index{0};
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-10 * smax) ++rank;
    return rank;
  };
  std::vector<Index> comb;
  for (Index k = 1; k <= kmax; ++k) {
    const double count = binomial(d, k);
    if (count > kSparkSubsetBudget) {
      throw ModelError("spark: combinatorial budget exceeded at k=" +
                       std::to_string(k) + " (" + std::to_string(count) +
                       " subsets > 1e6)");
    }
    if (k > L) return k;  // k > L columns are always dependent
    comb.resize(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) comb[static_cast<std::size_t>(i)] = i;
    Matrix sub(L, k), sub_gram(k, k);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
    while (true) {
      for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j)
          sub_gram(i, j) = gram(comb[static_cast<std::size_t>(i)], comb[static_cast<std::size_t>(j)]);
      eig.compute(sub_gram, Eigen::EigenvaluesOnly);
      // Eigenvalues of the Gram are the squared singular values, accurate to
      // about eps * lambda_max; a ratio above 1e-12 certifies full rank far
      // from the 1e-10 singular-value threshold. Anything closer is decided
      // by the SVD of the columns themselves.
      const double lmax = eig.eigenvalues()(k - 1);
      if (!(lmax > 0.0 && eig.eigenvalues()(0) > 1e-12 * lmax) && column_rank(sub, comb) < k) {
        return k;
      }
      // Next combination in lexicographic order.
      Index i = k - 1;
      while (i >= 0 && comb[static_cast<std::size_t>(i)] == d - k + i) --i;
      if (i < 0) break;
      ++comb[static_cast<std::size_t>(i)];
      for (Index j = i + 1; j < k; ++j)
        comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return std::nullopt;
}

}  // namespace dcpd
