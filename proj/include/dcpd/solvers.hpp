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

// Decomposition algorithms: plain ALS, projected ALS, the matching-pursuit
// family (MPALS, SMPALS, Flex-MPALS) and ALS with a fast-gradient S step.
//
// One outer iteration is one full cycle over A, C and the (B, S) block. The
// reported cost is the squared residual |T - [[A, B, C]]|_F^2, plus
// lambda |B - D S|_F^2 for Flex-MPALS.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dcpd/dictionary.hpp"
#include "dcpd/error.hpp"
#include "dcpd/numerics.hpp"
#include "dcpd/random.hpp"
#include "dcpd/tensor.hpp"

namespace dcpd {

enum class SolverKind { kAls, kProjectedAls, kMpals, kSmpals, kFlexMpals, kAlsFg };

inline constexpr std::string_view solver_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::kAls: return "als";
    case SolverKind::kProjectedAls: return "als-proj";
    case SolverKind::kMpals: return "mpals";
    case SolverKind::kSmpals: return "smpals";
    case SolverKind::kFlexMpals: return "flex-mpals";
    case SolverKind::kAlsFg: return "als-fg";
  }
  return "?";
}

inline constexpr SolverKind kAllSolvers[] = {
    SolverKind::kAls,    SolverKind::kProjectedAls, SolverKind::kMpals,
    SolverKind::kSmpals, SolverKind::kFlexMpals,    SolverKind::kAlsFg};

inline std::optional<SolverKind> parse_solver(std::string_view name) {
  for (SolverKind k : kAllSolvers)
    if (solver_name(k) == name) return k;
  return std::nullopt;
}

inline std::string solver_names() {
  std::string out;
  for (SolverKind k : kAllSolvers) {
    if (!out.empty()) out += ", ";
    out += solver_name(k);
  }
  return out;
}

struct SolverConfig {
  Index rank = 10;
  int max_outer_iters = 1000;
  double stop_tol = 1e-4;
  bool nonneg = false;
  bool no_repeat = false;
  /// Coupling strength: fixed for Flex-MPALS, initial value for SMPALS.
  double lambda = 0.04;
  /// SMPALS growth factor for lambda.
  double p = 1.1;
  /// Final l1 weight of the ALS-FG ramp (delta grows linearly from 0).
  double delta_max = 0.1;
  int fg_inner_iters = 10;
  double fg_alpha0 = 0.05;
  /// Use the product of *squared* largest eigenvalues as the ALS-FG
  /// Lipschitz constant instead of the plain product.
  bool lipschitz_squared = false;
  bool normalize_A = false;
  /// Record the objective after every block update (block_trace).
  bool trace_blocks = false;
  /// Flex-MPALS: throw if the objective increases at a block update.
  bool check_descent = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (rank < 1) throw ModelError("rank must be >= 1");
    if (max_outer_iters < 1) throw ModelError("max_outer_iters must be >= 1");
    if (!(stop_tol > 0.0)) throw ModelError("stop_tol must be positive");
    if (!(lambda >= 0.0)) throw ModelError("lambda must be >= 0");
    if (!(p > 1.0)) throw ModelError("p must be > 1");
    if (!(delta_max >= 0.0)) throw ModelError("delta_max must be >= 0");
    if (fg_inner_iters < 1) throw ModelError("fg_inner_iters must be >= 1");
    if (!(fg_alpha0 > 0.0 && fg_alpha0 <= 1.0)) throw ModelError("fg_alpha0 must be in (0, 1]");
  }
};

struct FitReport {
  Factors factors;
  Selection selection;
  std::vector<double> cost_trace;
  std::vector<double> block_trace;
  bool converged = false;
  int iterations = 0;
  double wall_time = 0.0;
  double rel_err = 0.0;
  std::vector<std::string> warnings;
};

/// True when the last relative cost change |E_i - E_{i-1}| / E_i is below tol.
inline bool stopping(const std::vector<double>& trace, double tol) {
  if (trace.size() < 2) throw ModelError("stopping: need at least two cost values");
  const double cur = trace.back();
  const double prev = trace[trace.size() - 2];
  if (cur == prev) return true;
  if (cur == 0.0) return false;
  return std::abs(cur - prev) / cur < tol;
}

/// A and C (and B) with i.i.d. standard normal entries and unit columns.
inline Factors init_random(Dims dims, Index rank, std::uint64_t seed) {
  if (rank < 1) throw ModelError("init_random: rank must be >= 1");
  Rng gen = make_rng(seed, 0x1a17);
  Factors f{random_normal(dims.K, rank, gen), random_normal(dims.L, rank, gen),
            random_normal(dims.M, rank, gen)};
  normalize_columns(f.A);
  normalize_columns(f.B);
  normalize_columns(f.C);
  return f;
}

/// Cached unfoldings of a data tensor plus the per-mode products the
/// alternating updates need.
class Problem {
 public:
  explicit Problem(const Tensor3& t)
      : dims_(t.dims()),
        t1_(unfold(t, 1)),
        t2_(unfold(t, 2)),
        t3_(unfold(t, 3)),
        norm2_(t.squared_norm()) {}

  const Dims& dims() const { return dims_; }
  double squared_norm() const { return norm2_; }
  const Matrix& unfolding(int mode) const {
    check_mode(mode);
    return mode == 1 ? t1_ : mode == 2 ? t2_ : t3_;
  }

  /// unfold(T, mode) times the Khatri-Rao product of the other two factors.
  Matrix mttkrp(int mode, const Factors& f) const {
    switch (mode) {
      case 1: return t1_ * khatri_rao(f.B, f.C);
      case 2: return t2_ * khatri_rao(f.A, f.C);
      case 3: return t3_ * khatri_rao(f.A, f.B);
      default: check_mode(mode);
    }
    return {};
  }

  static Matrix gram(int mode, const Factors& f) {
    switch (mode) {
      case 1: return (f.B.transpose() * f.B).cwiseProduct(f.C.transpose() * f.C);
      case 2: return (f.A.transpose() * f.A).cwiseProduct(f.C.transpose() * f.C);
      case 3: return (f.A.transpose() * f.A).cwiseProduct(f.B.transpose() * f.B);
      default: check_mode(mode);
    }
    return {};
  }

  /// |T - [[A, B, C]]|_F^2, evaluated on the explicit residual.
  double residual(const Factors& f) const {
    return (t2_ - f.B * khatri_rao(f.A, f.C).transpose()).squaredNorm();
  }

  void check_factors(const Factors& f) const {
    f.validate();
    if (!(f.dims() == dims_)) {
      throw ModelError("factor shapes " + to_string(f.dims()) +
                       " do not match tensor " + to_string(dims_));
    }
  }

 private:
  Dims dims_;
  Matrix t1_, t2_, t3_;
  double norm2_;
};

/// Least-squares (or nonnegative least-squares) update of one factor with
/// the other two fixed.
inline Matrix update_factor(const Problem& prob, int mode, const Factors& f,
                            bool nonneg) {
  const Matrix rhs = prob.mttkrp(mode, f);
  const Matrix g = Problem::gram(mode, f);
  return nonneg ? nnls(g, rhs) : solve_gram(g, rhs);
}

inline Matrix ls_update_factor(const Tensor3& t, int mode, const Factors& f) {
  check_mode(mode);
  Problem prob(t);
  prob.check_factors(f);
  return update_factor(prob, mode, f, false);
}

/// B = (MTTKRP + lambda D S)(G + lambda I)^{-1}.
inline Matrix coupled_b_update(const Matrix& mttkrp, const Matrix& gram,
                               const Matrix& ds, double lambda) {
  Matrix g = gram;
  g.diagonal().array() += lambda;
  return solve_gram(g, mttkrp + lambda * ds);
}

// --- Fast gradient on S -----------------------------------------------------

/// Largest step not exceeding inv_lipschitz after which every column of
/// max(0, S - step g) keeps a positive entry. Columns holding a positive
/// entry with nonpositive gradient cannot vanish and impose no bound.
inline double fg_safe_step(const Matrix& s, const Matrix& g, double inv_lipschitz) {
  double step = inv_lipschitz;
  for (Index j = 0; j < s.cols(); ++j) {
    bool unconstrained = false;
    double max_ratio = 0.0;
    for (Index i = 0; i < s.rows(); ++i) {
      if (s(i, j) <= 0.0) continue;
      if (g(i, j) <= 0.0) {
        unconstrained = true;
        break;
      }
      max_ratio = std::max(max_ratio, s(i, j) / g(i, j));
    }
    if (unconstrained || max_ratio == 0.0) continue;
    double bound = max_ratio - 1e-12;
    if (bound <= 0.0) bound = 0.5 * max_ratio;
    step = std::min(step, bound);
  }
  return step;
}

/// Nesterov fast gradient on the nonnegative, unit-column score matrix S for
///   1/2 |T - [[A, D S, C]]|^2 + delta * sum(S)
/// with A and C fixed.
class FastGradientS {
 public:
  FastGradientS(const Dictionary& dict, const Matrix& mttkrp_b, const Matrix& gram_b,
                double lipschitz, double delta, Matrix s0, double alpha0)
      : dict_(&dict),
        gram_(gram_b),
        dt_mttkrp_(dict.atoms().transpose() * mttkrp_b),
        inv_l_(1.0 / lipschitz),
        delta_(delta),
        s_(std::move(s0)),
        y_(s_),
        alpha_(alpha0) {
    if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) {
      throw NumericalError("fast gradient: Lipschitz constant is zero (degenerate D or factors)");
    }
  }

  /// Gradient D^T D Y G - D^T T_2 (A kr C) + delta.
  Matrix gradient(const Matrix& y) const {
    const Matrix& d = dict_->atoms();
    Matrix g = d.transpose() * ((d * y) * gram_);
    g -= dt_mttkrp_;
    g.array() += delta_;
    return g;
  }

  void step() {
    const Matrix g = gradient(y_);
    last_step_ = fg_safe_step(y_, g, inv_l_);
    Matrix next = (y_ - last_step_ * g).cwiseMax(0.0);
    for (Index j = 0; j < next.cols(); ++j) {
      const double n = next.col(j).norm();
      if (n == 0.0) throw NumericalError("fast gradient: column of S vanished");
      next.col(j) /= n;
    }
    const double a_old = alpha_;
    alpha_ = 0.5 * (-a_old * a_old + std::sqrt(a_old * a_old * a_old * a_old + 4.0 * a_old));
    const double beta = a_old * (1.0 - a_old) / (a_old * a_old + alpha_);
    y_ = next + beta * (next - s_);
    s_ = std::move(next);
  }

  const Matrix& s() const { return s_; }
  double last_step() const { return last_step_; }

 private:
  const Dictionary* dict_;
  Matrix gram_;
  Matrix dt_mttkrp_;
  double inv_l_;
  double delta_;
  Matrix s_;
  Matrix y_;
  double alpha_;
  double last_step_ = 0.0;
};

/// Objective 1/2 |T - [[A, D S, C]]|_F^2 + delta sum(S) and its gradient
/// in S, evaluated from scratch (used by tests and diagnostics).
inline double fg_objective(const Tensor3& t, const Factors& f, const Dictionary& dict,
                           const Matrix& s, double delta) {
  Factors model{f.A, dict.atoms() * s, f.C};
  Problem prob(t);
  return 0.5 * prob.residual(model) + delta * s.sum();
}

inline Matrix fg_gradient(const Tensor3& t, const Factors& f, const Dictionary& dict,
                          const Matrix& s, double delta) {
  Problem prob(t);
  Factors model{f.A, dict.atoms() * s, f.C};
  const Matrix d = dict.atoms();
  Matrix g = d.transpose() * (d * s * Problem::gram(2, model)) -
             d.transpose() * prob.mttkrp(2, model);
  g.array() += delta;
  return g;
}

/// Lipschitz constant of the S-gradient: largest eigenvalue of D^T D times
/// that of (A^T A o C^T C); both squared when `squared` is set.
inline double fg_lipschitz(double dict_sigma_max, const Matrix& gram_b, bool squared) {
  const double ed = dict_sigma_max * dict_sigma_max;
  const double eg = Eigen::SelfAdjointEigenSolver<Matrix>(gram_b, Eigen::EigenvaluesOnly)
                       .eigenvalues()
                       .maxCoeff();
  return squared ? ed * ed * eg * eg : ed * eg;
}

// --- Solvers ----------------------------------------------------------------

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline bool exact_fit(double cost, const Problem& prob) {
  return cost <= 1e-28 * prob.squared_norm();
}

inline void normalize_a(Factors& f) {
  const Vector norms = normalize_columns(f.A);
  for (Index r = 0; r < f.C.cols(); ++r)
    if (norms(r) > 0.0) f.C.col(r) *= norms(r);
}

inline void check_inputs(const Problem& prob, const Factors& init,
                         const SolverConfig& cfg, const Dictionary* dict) {
  cfg.validate();
  prob.check_factors(init);
  if (dict && dict->atom_dim() != prob.dims().L) {
    throw ModelError("dictionary atom dimension " + std::to_string(dict->atom_dim()) +
                     " does not match tensor mode-2 size " + std::to_string(prob.dims().L));
  }
  if (dict && cfg.no_repeat && dict->size() < init.rank()) {
    throw ModelError("no-repeat selection needs at least R atoms");
  }
}

inline void finish(FitReport& rep, const Problem& prob, Clock::time_point t0) {
  rep.rel_err = std::sqrt(prob.residual(rep.factors) / prob.squared_norm());
  rep.wall_time = seconds_since(t0);
}

inline NumericalError with_context(std::string_view solver, int it,
                                   const NumericalError& e) {
  return NumericalError(std::string(solver) + ": outer iteration " +
                            std::to_string(it) + ": " + e.what(),
                        e.residual());
}

inline void note_zero_columns(FitReport& rep, const Selection& sel) {
  if (sel.zero_columns > 0 && rep.warnings.empty()) {
    rep.warnings.push_back("zero column of B during atom selection; atom 0 used");
  }
}

}  // namespace detail

inline FitReport als_cpd(const Tensor3& t, const SolverConfig& cfg, const Factors& init) {
  const auto t0 = detail::Clock::now();
  const Problem prob(t);
  detail::check_inputs(prob, init, cfg, nullptr);
  FitReport rep;
  rep.factors = init;
  Factors& f = rep.factors;
  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    try {
      f.A = update_factor(prob, 1, f, cfg.nonneg);
      if (cfg.normalize_A) detail::normalize_a(f);
      f.B = update_factor(prob, 2, f, cfg.nonneg);
      f.C = update_factor(prob, 3, f, cfg.nonneg);
    } catch (const NumericalError& e) {
      throw detail::with_context("als", it, e);
    }
    rep.cost_trace.push_back(prob.residual(f));
    rep.iterations = it;
    if (detail::exact_fit(rep.cost_trace.back(), prob) ||
        (rep.cost_trace.size() >= 2 && stopping(rep.cost_trace, cfg.stop_tol))) {
      rep.converged = true;
      break;
    }
  }
  detail::finish(rep, prob, t0);
  return rep;
}

/// Projects the B of a finished fit onto the dictionary once and re-solves
/// A and C by least squares.
inline FitReport project_fit(const Tensor3& t, const SolverConfig& cfg, FitReport rep,
                             const Dictionary& dict) {
  const auto t0 = detail::Clock::now();
  const Problem prob(t);
  detail::check_inputs(prob, rep.factors, cfg, &dict);
  Factors& f = rep.factors;
  rep.selection = select_atoms(f.B, dict, cfg.no_repeat, cfg.nonneg);
  detail::note_zero_columns(rep, rep.selection);
  f.B = project(rep.selection, dict);
  try {
    f.A = update_factor(prob, 1, f, cfg.nonneg);
    if (cfg.normalize_A) detail::normalize_a(f);
    f.C = update_factor(prob, 3, f, cfg.nonneg);
  } catch (const NumericalError& e) {
    throw detail::with_context("als-proj", rep.iterations + 1, e);
  }
  rep.cost_trace.push_back(prob.residual(f));
  const double before = rep.wall_time;
  detail::finish(rep, prob, t0);
  rep.wall_time += before;
  return rep;
}

/// ALS to termination, then one projection of B onto the dictionary and a
/// single least-squares re-solve of A and C.
inline FitReport projected_als(const Tensor3& t, const SolverConfig& cfg,
                               const Factors& init, const Dictionary& dict) {
  {
    const Problem prob(t);
    detail::check_inputs(prob, init, cfg, &dict);
  }
  return project_fit(t, cfg, als_cpd(t, cfg, init), dict);
}

/// Matching pursuit ALS: least-squares A and C, then a least-squares B that
/// is replaced by its closest atoms. Returns the best iterate seen.
inline FitReport mpals(const Tensor3& t, const SolverConfig& cfg, const Factors& init,
                       const Dictionary& dict) {
  const auto t0 = detail::Clock::now();
  const Problem prob(t);
  detail::check_inputs(prob, init, cfg, &dict);
  FitReport rep;
  Factors f = init;
  Selection sel;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    try {
      f.A = update_factor(prob, 1, f, cfg.nonneg);
      if (cfg.normalize_A) detail::normalize_a(f);
      f.C = update_factor(prob, 3, f, cfg.nonneg);
      f.B = update_factor(prob, 2, f, false);
    } catch (const NumericalError& e) {
      throw detail::with_context("mpals", it, e);
    }
    sel = select_atoms(f.B, dict, cfg.no_repeat, cfg.nonneg);
    detail::note_zero_columns(rep, sel);
    f.B = project(sel, dict);
    const double cost = prob.residual(f);
    rep.cost_trace.push_back(cost);
    rep.iterations = it;
    if (cost < best) {
      best = cost;
      rep.factors = f;
      rep.selection = sel;
    }
    if (detail::exact_fit(cost, prob) ||
        (rep.cost_trace.size() >= 2 && stopping(rep.cost_trace, cfg.stop_tol))) {
      rep.converged = true;
      break;
    }
  }
  detail::finish(rep, prob, t0);
  return rep;
}

/// Smooth MPALS: B from the coupled update, lambda grown by p while B stays
/// far from D S; A and C always see the projected B = D S.
inline FitReport smpals(const Tensor3& t, const SolverConfig& cfg, const Factors& init,
                        const Dictionary& dict) {
  const auto t0 = detail::Clock::now();
  const Problem prob(t);
  detail::check_inputs(prob, init, cfg, &dict);
  if (!(cfg.lambda > 0.0)) throw ModelError("smpals: lambda must be > 0");
  FitReport rep;
  Factors f = init;
  Selection sel = select_atoms(f.B, dict, cfg.no_repeat, cfg.nonneg);
  double lambda = cfg.lambda;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    Matrix b_flex;
    try {
      f.B = project(sel, dict);
      f.A = update_factor(prob, 1, f, cfg.nonneg);
      if (cfg.normalize_A) detail::normalize_a(f);
      f.C = update_factor(prob, 3, f, cfg.nonneg);
      b_flex = coupled_b_update(prob.mttkrp(2, f), Problem::gram(2, f), f.B, lambda);
    } catch (const NumericalError& e) {
      throw detail::with_context("smpals", it, e);
    }
    sel = select_atoms(b_flex, dict, cfg.no_repeat, cfg.nonneg);
    detail::note_zero_columns(rep, sel);
    f.B = project(sel, dict);
    if ((b_flex - f.B).squaredNorm() > 0.01 * b_flex.squaredNorm()) lambda *= cfg.p;
    const double cost = prob.residual(f);
    rep.cost_trace.push_back(cost);
    rep.iterations = it;
    if (cost < best) {
      best = cost;
      rep.factors = f;
      rep.selection = sel;
    }
    if (detail::exact_fit(cost, prob) ||
        (rep.cost_trace.size() >= 2 && stopping(rep.cost_trace, cfg.stop_tol))) {
      rep.converged = true;
      break;
    }
  }
  detail::finish(rep, prob, t0);
  return rep;
}

/// |T - [[A, B, C]]|^2 + lambda |B - D S|^2.
inline double flex_objective(const Problem& prob, const Factors& f, const Dictionary& dict,
                             const Selection& sel, double lambda) {
  return prob.residual(f) + lambda * (f.B - project(sel, dict)).squaredNorm();
}

/// Fully flexible MPALS: fixed lambda, B never replaced by D S.
inline FitReport flex_mpals(const Tensor3& t, const SolverConfig& cfg, const Factors& init,
                            const Dictionary& dict) {
  const auto t0 = detail::Clock::now();
  const Problem prob(t);
  detail::check_inputs(prob, init, cfg, &dict);
  FitReport rep;
  bool check = cfg.check_descent;
  if (check && !dict.unit_norm()) {
    rep.warnings.push_back("dictionary atoms are not unit-norm; descent check disabled");
    check = false;
  }
  Factors f = init;
  Selection sel = select_atoms(f.B, dict, cfg.no_repeat, cfg.nonneg);
  const bool track = cfg.trace_blocks || check;
  double last = track ? flex_objective(prob, f, dict, sel, cfg.lambda) : 0.0;
  if (cfg.trace_blocks) rep.block_trace.push_back(last);
  auto record = [&](int it, const char* block) {
    if (!track) return;
    const double obj = flex_objective(prob, f, dict, sel, cfg.lambda);
    if (cfg.trace_blocks) rep.block_trace.push_back(obj);
    if (check && obj > last + 1e-9 * std::max(last, 1e-300)) {
      throw NumericalError("flex-mpals: objective increased at outer iteration " +
                               std::to_string(it) + ", block " + block,
                           obj - last);
    }
    last = obj;
  };
  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    try {
      f.A = update_factor(prob, 1, f, cfg.nonneg);
      if (cfg.normalize_A) detail::normalize_a(f);
      record(it, "A");
      f.C = update_factor(prob, 3, f, cfg.nonneg);
      record(it, "C");
      f.B = coupled_b_update(prob.mttkrp(2, f), Problem::gram(2, f), project(sel, dict),
                             cfg.lambda);
      record(it, "B");
    } catch (const NumericalError& e) {
      throw detail::with_context("flex-mpals", it, e);
    }
    sel = select_atoms(f.B, dict, cfg.no_repeat, cfg.nonneg);
    detail::note_zero_columns(rep, sel);
    record(it, "S");
    rep.cost_trace.push_back(flex_objective(prob, f, dict, sel, cfg.lambda));
    rep.iterations = it;
    if (detail::exact_fit(rep.cost_trace.back(), prob) ||
        (rep.cost_trace.size() >= 2 && stopping(rep.cost_trace, cfg.stop_tol))) {
      rep.converged = true;
      break;
    }
  }
  rep.factors = f;
  rep.selection = sel;
  detail::finish(rep, prob, t0);
  return rep;
}

/// Alternates least-squares A, C with a fast-gradient estimate of a dense
/// nonnegative S (B = D S). The l1 weight ramps linearly from 0 to
/// delta_max over the outer iterations. At the end S is binarized by
/// column argmax and A, C are re-solved once.
inline FitReport als_fg(const Tensor3& t, const SolverConfig& cfg, const Factors& init,
                        const Dictionary& dict,
                        const std::optional<Selection>& init_selection = std::nullopt) {
  const auto t0 = detail::Clock::now();
  const Problem prob(t);
  detail::check_inputs(prob, init, cfg, &dict);
  FitReport rep;
  Factors f = init;

  Selection start = init_selection ? *init_selection
                                   : select_atoms(f.B, dict, false, cfg.nonneg);
  // S >= 0 carries no sign, so flip A where the matched correlation is negative.
  for (Index r = 0; r < f.rank(); ++r) {
    if (start.signs[static_cast<std::size_t>(r)] < 0) f.A.col(r) *= -1.0;
  }
  Matrix s = selection_to_dense(start, dict.size());
  const double dict_sigma = spectral_norm(dict.atoms());

  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    try {
      f.B = dict.atoms() * s;
      f.A = update_factor(prob, 1, f, cfg.nonneg);
      if (cfg.normalize_A) detail::normalize_a(f);
      f.C = update_factor(prob, 3, f, cfg.nonneg);
      const double delta =
          cfg.max_outer_iters == 1
              ? cfg.delta_max
              : cfg.delta_max * static_cast<double>(it - 1) /
                    static_cast<double>(cfg.max_outer_iters - 1);
      const Matrix gram = Problem::gram(2, f);
      FastGradientS fg(dict, prob.mttkrp(2, f), gram,
                       fg_lipschitz(dict_sigma, gram, cfg.lipschitz_squared), delta,
                       std::move(s), cfg.fg_alpha0);
      for (int k = 0; k < cfg.fg_inner_iters; ++k) fg.step();
      s = fg.s();
    } catch (const NumericalError& e) {
      throw detail::with_context("als-fg", it, e);
    }
    f.B = dict.atoms() * s;
    rep.cost_trace.push_back(prob.residual(f));
    rep.iterations = it;
    if (detail::exact_fit(rep.cost_trace.back(), prob) ||
        (rep.cost_trace.size() >= 2 && stopping(rep.cost_trace, cfg.stop_tol))) {
      rep.converged = true;
      break;
    }
  }

  Selection sel;
  for (Index r = 0; r < s.cols(); ++r) {
    Index best = 0;
    for (Index j = 1; j < s.rows(); ++j)
      if (s(j, r) > s(best, r)) best = j;
    sel.indices.push_back(best);
    sel.signs.push_back(1);
  }
  f.B = project(sel, dict);
  try {
    f.A = update_factor(prob, 1, f, cfg.nonneg);
    if (cfg.normalize_A) detail::normalize_a(f);
    f.C = update_factor(prob, 3, f, cfg.nonneg);
  } catch (const NumericalError& e) {
    throw detail::with_context("als-fg", rep.iterations + 1, e);
  }
  rep.cost_trace.push_back(prob.residual(f));
  rep.factors = f;
  rep.selection = sel;
  detail::finish(rep, prob, t0);
  return rep;
}

/// Runs the named solver. Plain ALS ignores the dictionary except to report
/// the closest atoms of its B.
inline FitReport solve(SolverKind kind, const Tensor3& t, const SolverConfig& cfg,
                       const Factors& init, const Dictionary& dict) {
  switch (kind) {
    case SolverKind::kAls: {
      FitReport rep = als_cpd(t, cfg, init);
      if (dict.atom_dim() == rep.factors.B.rows()) {
        rep.selection = select_atoms(rep.factors.B, dict, cfg.no_repeat, cfg.nonneg);
      }
      return rep;
    }
    case SolverKind::kProjectedAls: return projected_als(t, cfg, init, dict);
    case SolverKind::kMpals: return mpals(t, cfg, init, dict);
    case SolverKind::kSmpals: return smpals(t, cfg, init, dict);
    case SolverKind::kFlexMpals: return flex_mpals(t, cfg, init, dict);
    case SolverKind::kAlsFg: return als_fg(t, cfg, init, dict);
  }
  throw ModelError("unknown solver");
}

}  // namespace dcpd
