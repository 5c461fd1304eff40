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

// Dictionaries of atoms, matching scores and projection onto atoms.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dcpd/error.hpp"
#include "dcpd/numerics.hpp"
#include "dcpd/tensor.hpp"

namespace dcpd {

/// L x d matrix of atoms, one per column.
class Dictionary {
 public:
  Dictionary() = default;

  explicit Dictionary(Matrix atoms,
                      std::optional<std::vector<int>> class_labels = std::nullopt)
      : atoms_(std::move(atoms)), labels_(std::move(class_labels)) {
    if (atoms_.cols() < 1 || atoms_.rows() < 1) throw ModelError("empty dictionary");
    if (!atoms_.allFinite()) throw ModelError("dictionary has non-finite entries");
    norms_ = atoms_.colwise().norm().transpose();
    for (Index j = 0; j < norms_.size(); ++j) {
      if (norms_(j) == 0.0) {
        throw ModelError("dictionary atom " + std::to_string(j) + " is all zero");
      }
    }
    if (labels_ && static_cast<Index>(labels_->size()) != atoms_.cols()) {
      throw ModelError("class label count does not match atom count");
    }
    unit_norm_ = ((norms_.array() - 1.0).abs() <= 1e-12).all();
  }

  const Matrix& atoms() const { return atoms_; }
  const Vector& atom_norms() const { return norms_; }
  Index atom_dim() const { return atoms_.rows(); }
  Index size() const { return atoms_.cols(); }
  bool unit_norm() const { return unit_norm_; }
  bool nonnegative() const { return (atoms_.array() >= 0.0).all(); }
  const std::optional<std::vector<int>>& class_labels() const { return labels_; }

 private:
  Matrix atoms_;
  Vector norms_;
  bool unit_norm_ = false;
  std::optional<std::vector<int>> labels_;
};

/// One atom index per factor column, with the sign of the matched
/// correlation. Encodes the binary selection matrix S (B = D S diag(signs)).
struct Selection {
  std::vector<Index> indices;
  std::vector<int> signs;
  Index zero_columns = 0;  ///< columns of B that had zero norm when selected

  Index rank() const { return static_cast<Index>(indices.size()); }

  bool distinct() const {
    return std::set<Index>(indices.begin(), indices.end()).size() == indices.size();
  }

  void validate(Index num_atoms) const {
    if (indices.size() != signs.size()) throw ModelError("selection: index/sign count mismatch");
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] < 0 || indices[i] >= num_atoms) {
        throw ModelError("selection: atom index " + std::to_string(indices[i]) +
                         " out of range [0, " + std::to_string(num_atoms) + ")");
      }
      if (signs[i] != 1 && signs[i] != -1) throw ModelError("selection: signs must be +1 or -1");
    }
  }

  friend bool operator==(const Selection& a, const Selection& b) {
    return a.indices == b.indices && a.signs == b.signs;
  }
};

inline Dictionary normalize_atoms(const Dictionary& dict) {
  Matrix atoms = dict.atoms();
  for (Index j = 0; j < atoms.cols(); ++j) atoms.col(j) /= dict.atom_norms()(j);
  return Dictionary(std::move(atoms), dict.class_labels());
}

namespace detail {

inline constexpr Index kScoreBlock = 4096;

// Signed normalized correlations <b_i, d_j> / |d_j| for an L x d expression
// of atoms, computed over blocks of atoms. Zero-norm atoms score 0.
template <typename Atoms>
Matrix signed_scores(const Matrix& b, const Eigen::MatrixBase<Atoms>& atoms,
                     const Vector& norms) {
  if (b.rows() != atoms.rows()) {
    throw ModelError("match_scores: factor has " + std::to_string(b.rows()) +
                     " rows but atoms have dimension " + std::to_string(atoms.rows()));
  }
  const Index d = atoms.cols();
  Matrix out(b.cols(), d);
  for (Index j0 = 0; j0 < d; j0 += kScoreBlock) {
    const Index nb = std::min(kScoreBlock, d - j0);
    out.middleCols(j0, nb).noalias() = b.transpose() * atoms.middleCols(j0, nb);
  }
  for (Index j = 0; j < d; ++j) {
    if (norms(j) > 0.0) {
      out.col(j) /= norms(j);
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

inline Selection select_from_scores(const Matrix& signed_score, bool no_repeat,
                                    bool nonneg, const Matrix& b) {
  const Index R = signed_score.rows(), d = signed_score.cols();
  if (no_repeat && d < R) {
    throw ModelError("select_atoms: no-repeat mode needs d >= R (d=" +
                     std::to_string(d) + ", R=" + std::to_string(R) + ")");
  }
  const Matrix score = signed_score.cwiseAbs();
  Selection sel;
  sel.indices.resize(static_cast<std::size_t>(R));
  sel.signs.resize(static_cast<std::size_t>(R));
  if (no_repeat) {
    // Assignment on cosines, so rescaling one column of B cannot trade
    // atoms with another column.
    Matrix cosine = score;
    for (Index i = 0; i < R; ++i) {
      const double n = b.col(i).norm();
      if (n > 0.0) cosine.row(i) /= n;
    }
    const AssignmentResult a = assignment_max(cosine);
    for (Index i = 0; i < R; ++i)
      sel.indices[static_cast<std::size_t>(i)] = a.column_to_atom[static_cast<std::size_t>(i)];
  } else {
    for (Index i = 0; i < R; ++i) {
      Index best = 0;
      for (Index j = 1; j < d; ++j)
        if (score(i, j) > score(i, best)) best = j;
      sel.indices[static_cast<std::size_t>(i)] = best;
    }
  }
  for (Index i = 0; i < R; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double s = signed_score(i, sel.indices[ui]);
    sel.signs[ui] = (nonneg || s >= 0.0) ? 1 : -1;
    if (b.col(i).squaredNorm() == 0.0) ++sel.zero_columns;
  }
  return sel;
}

template <typename Atoms>
Matrix project_atoms(const Selection& sel, const Eigen::MatrixBase<Atoms>& atoms) {
  sel.validate(atoms.cols());
  Matrix out(atoms.rows(), sel.rank());
  for (Index i = 0; i < sel.rank(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    out.col(i) = static_cast<double>(sel.signs[ui]) * atoms.col(sel.indices[ui]);
  }
  return out;
}

}  // namespace detail

/// score(i, j) = |<b_i, d_j>| / |d_j|.
inline Matrix match_scores(const Matrix& b, const Dictionary& dict) {
  return detail::signed_scores(b, dict.atoms(), dict.atom_norms()).cwiseAbs();
}

/// Picks one atom per column of B: the best-scoring atom (lowest index on
/// ties), or the best injective assignment when `no_repeat` is set. In
/// nonnegative mode every sign is +1.
inline Selection select_atoms(const Matrix& b, const Dictionary& dict,
                              bool no_repeat, bool nonneg = false) {
  const Matrix s = detail::signed_scores(b, dict.atoms(), dict.atom_norms());
  return detail::select_from_scores(s, no_repeat, nonneg, b);
}

/// B = D S diag(signs).
inline Matrix project(const Selection& sel, const Dictionary& dict) {
  return detail::project_atoms(sel, dict.atoms());
}

/// Dense d x R nonnegative form of a selection (signs dropped).
inline Matrix selection_to_dense(const Selection& sel, Index num_atoms) {
  sel.validate(num_atoms);
  Matrix s = Matrix::Zero(num_atoms, sel.rank());
  for (Index i = 0; i < sel.rank(); ++i) s(sel.indices[static_cast<std::size_t>(i)], i) = 1.0;
  return s;
}

}  // namespace dcpd
