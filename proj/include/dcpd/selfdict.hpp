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

// Self-dictionary factorization of a nonnegative pixels x bands matrix,
// M ~ A B^T with the columns of B taken from the rows of M (pure pixels).

#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dcpd/dictionary.hpp"
#include "dcpd/error.hpp"
#include "dcpd/numerics.hpp"
#include "dcpd/solvers.hpp"
#include "dcpd/tensor.hpp"

namespace dcpd {

/// n x L nonnegative matrix, one pixel spectrum per row.
struct HsiMatrix {
  Matrix values;
  std::optional<std::pair<Index, Index>> spatial;  ///< (height, width)

  Index pixels() const { return values.rows(); }
  Index bands() const { return values.cols(); }

  void validate() const {
    if (values.size() == 0) throw ModelError("empty HSI matrix");
    if (!values.allFinite()) throw ModelError("HSI matrix has non-finite entries");
    if ((values.array() < 0.0).any()) throw ModelError("HSI matrix must be nonnegative");
    if (spatial && spatial->first * spatial->second != values.rows()) {
      throw ModelError("spatial dims " + std::to_string(spatial->first) + "x" +
                       std::to_string(spatial->second) + " do not match " +
                       std::to_string(values.rows()) + " pixels");
    }
  }
};

struct UnmixResult {
  std::vector<Index> endmember_indices;
  std::vector<Index> init_indices;
  Matrix abundances;  ///< n x R
  Matrix endmembers;  ///< L x R, selected rows of M transposed
  double rel_err = 0.0;
  double init_rel_err = 0.0;
  Vector residual_map;
  std::vector<double> cost_trace;
  int iterations = 0;
  double wall_time = 0.0;
};

/// Successive projection: R times, take the row of largest residual norm
/// (lowest index on ties) and project every row onto the orthogonal
/// complement of it.
inline std::vector<Index> spa(const Matrix& m, Index rank) {
  if (rank < 1 || rank > std::min(m.rows(), m.cols())) {
    throw ModelError("spa: rank must lie in [1, min(n, L)]");
  }
  Matrix res = m;
  std::vector<Index> picked;
  const double first_max = m.rowwise().squaredNorm().maxCoeff();
  for (Index r = 0; r < rank; ++r) {
    const Vector norms = res.rowwise().squaredNorm();
    Index best = 0;
    for (Index i = 1; i < norms.size(); ++i)
      if (norms(i) > norms(best)) best = i;
    if (norms(best) <= 1e-24 * first_max || norms(best) == 0.0) {
      throw NumericalError("spa: residual vanished after " + std::to_string(r) +
                           " selections (rank collapse)");
    }
    picked.push_back(best);
    const Vector u = res.row(best).transpose() / std::sqrt(norms(best));
    res -= (res * u) * u.transpose();
  }
  return picked;
}

/// Per-pixel nonnegative least squares: rows of A minimizing |m_i - a_i E^T|.
inline Matrix nnls_abundances(const Matrix& m, const Matrix& endmembers) {
  if (endmembers.rows() != m.cols()) {
    throw ModelError("nnls_abundances: endmember length " + std::to_string(endmembers.rows()) +
                     " does not match band count " + std::to_string(m.cols()));
  }
  return nnls(endmembers.transpose() * endmembers, m * endmembers);
}

/// Per-pixel residual norms |m_i - a_i B^T|.
inline Vector residual_map(const Matrix& m, const Matrix& abundances, const Matrix& endmembers) {
  return (m - abundances * endmembers.transpose()).rowwise().norm();
}

namespace detail {

inline Matrix rows_as_atoms(const Matrix& m, const std::vector<Index>& idx) {
  Matrix b(m.cols(), static_cast<Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) b.col(static_cast<Index>(r)) = m.row(idx[r]).transpose();
  return b;
}

}  // namespace detail

/// Defaults for the matrix case: nonnegative, no repeated atoms, 50 outer
/// iterations, p = 1.5, lambda = 0 meaning 0.01 |M|^2 / (n R) for SMPALS.
inline SolverConfig selfdict_defaults(Index rank) {
  SolverConfig cfg;
  cfg.rank = rank;
  cfg.max_outer_iters = 50;
  cfg.nonneg = true;
  cfg.no_repeat = true;
  cfg.p = 1.5;
  cfg.lambda = 0.0;
  return cfg;
}

/// Matrix MPALS (or SMPALS / Flex-MPALS) with D = M^T, started from the
/// given pure-pixel indices. Abundances come from exact NNLS. The best
/// iterate, including the starting point, is returned.
inline UnmixResult self_dcpd(const HsiMatrix& hsi, Index rank, const SolverConfig& cfg_in,
                             const std::vector<Index>& init_indices,
                             SolverKind kind = SolverKind::kMpals) {
  const auto t0 = std::chrono::steady_clock::now();
  hsi.validate();
  const Matrix& m = hsi.values;
  const Index n = m.rows();
  if (rank < 1 || rank > std::min(n, m.cols())) {
    throw ModelError("rank " + std::to_string(rank) + " must lie in [1, min(pixels, bands)] = [1, " +
                     std::to_string(std::min(n, m.cols())) + "]");
  }
  if (static_cast<Index>(init_indices.size()) != rank) {
    throw ModelError("expected " + std::to_string(rank) + " initial indices, got " +
                     std::to_string(init_indices.size()));
  }
  for (Index i : init_indices)
    if (i < 0 || i >= n) throw ModelError("initial pixel index out of range");
  if (std::set<Index>(init_indices.begin(), init_indices.end()).size() != init_indices.size()) {
    throw ModelError("initial pixel indices must be distinct");
  }
  if (kind != SolverKind::kMpals && kind != SolverKind::kSmpals &&
      kind != SolverKind::kFlexMpals) {
    throw ModelError("self-dictionary unmixing supports mpals, smpals and flex-mpals");
  }
  SolverConfig cfg = cfg_in;
  cfg.rank = rank;
  cfg.nonneg = true;
  cfg.no_repeat = true;
  const double m2 = m.squaredNorm();
  if (m2 == 0.0) throw ModelError("HSI matrix is all zero");
  double lambda = cfg.lambda;
  if (kind == SolverKind::kSmpals && !(lambda > 0.0)) {
    lambda = 0.01 * m2 / (static_cast<double>(n) * static_cast<double>(rank));
  }
  if (kind == SolverKind::kFlexMpals && !(lambda > 0.0)) lambda = 0.04;
  cfg.validate();

  const Vector row_norms = m.rowwise().norm();
  auto select = [&](const Matrix& b) {
    const Matrix s = detail::signed_scores(b, m.transpose(), row_norms);
    return detail::select_from_scores(s, true, true, b);
  };

  UnmixResult out;
  out.init_indices = init_indices;
  std::vector<Index> idx = init_indices;
  Matrix b = detail::rows_as_atoms(m, idx);
  Matrix a = nnls_abundances(m, b);
  auto cost_of = [&](const Matrix& aa, const Matrix& bb) {
    return residual_map(m, aa, bb).squaredNorm();
  };
  double best = cost_of(a, b);
  out.init_rel_err = std::sqrt(best / m2);
  out.cost_trace.push_back(best);
  out.endmember_indices = idx;

  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    try {
      const Matrix gram = a.transpose() * a;
      const Matrix rhs = m.transpose() * a;  // L x R
      Matrix b_ls = kind == SolverKind::kMpals ? solve_gram(gram, rhs)
                                               : coupled_b_update(rhs, gram, detail::rows_as_atoms(m, idx), lambda);
      const Selection sel = select(b_ls);
      idx = sel.indices;
      const Matrix ds = detail::rows_as_atoms(m, idx);
      if (kind == SolverKind::kSmpals &&
          (b_ls - ds).squaredNorm() > 0.01 * b_ls.squaredNorm()) {
        lambda *= cfg.p;
      }
      b = kind == SolverKind::kFlexMpals ? b_ls : ds;
      a = nnls_abundances(m, b);
    } catch (const NumericalError& e) {
      throw detail::with_context("self-dcpd", it, e);
    }
    // Scores always refer to the selected pure pixels.
    const Matrix ds = detail::rows_as_atoms(m, idx);
    const Matrix a_sel = kind == SolverKind::kFlexMpals ? nnls_abundances(m, ds) : a;
    const double cost = cost_of(a_sel, ds);
    out.cost_trace.push_back(cost);
    out.iterations = it;
    if (cost < best) {
      best = cost;
      out.endmember_indices = idx;
    }
    if (cost <= 1e-28 * m2 || stopping(out.cost_trace, cfg.stop_tol)) break;
  }

  // Final abundances by exact NNLS on the retained pure pixels; a single
  // active-set pass reaches the fixed point of repeated NNLS refinement.
  out.endmembers = detail::rows_as_atoms(m, out.endmember_indices);
  out.abundances = nnls_abundances(m, out.endmembers);
  out.residual_map = residual_map(m, out.abundances, out.endmembers);
  out.rel_err = std::sqrt(out.residual_map.squaredNorm() / m2);
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace dcpd
