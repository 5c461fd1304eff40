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

// Synthetic benchmark: class-structured dictionaries, conditioned factors,
// identification metrics and seeded experiment grids.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "dcpd/dictionary.hpp"
#include "dcpd/error.hpp"
#include "dcpd/io.hpp"
#include "dcpd/numerics.hpp"
#include "dcpd/random.hpp"
#include "dcpd/solvers.hpp"
#include "dcpd/tensor.hpp"

namespace dcpd {

struct SynthSpec {
  Dims dims{20, 50, 7};
  Index atoms = 1000;
  Index classes = 50;
  Index rank = 10;
  std::vector<Index> re_values{7, 8, 9, 10, 11, 12, 13};
  double sigma = 0.01;
  std::vector<double> rho_values{0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  int trials = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (dims.K < 1 || dims.L < 1 || dims.M < 1) throw ModelError("tensor dims must be positive");
    if (atoms < 1 || classes < 1 || rank < 1 || trials < 1) {
      throw ModelError("atoms, classes, rank and trials must be positive");
    }
    if (atoms % classes != 0) {
      throw ModelError("classes (" + std::to_string(classes) + ") must divide atoms (" +
                       std::to_string(atoms) + ")");
    }
    if (rank > classes) throw ModelError("rank must not exceed the number of classes");
    if (!(sigma >= 0.0)) throw ModelError("sigma must be nonnegative");
    for (Index re : re_values)
      if (re < 1) throw ModelError("estimated ranks must be positive");
    for (double rho : rho_values)
      if (!(rho >= 0.0 && rho <= 1.0)) throw ModelError("rho values must lie in [0, 1]");
  }
};

namespace detail {

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }
inline double tri(double x) { return std::max(0.0, 1.0 - std::abs(x) / 2.0); }

// Seed streams of one trial.
enum : std::uint64_t {
  kStreamDictionary = 1,
  kStreamFactors = 2,
  kStreamNoise = 3,
  kStreamAlsInit = 4,
  kStreamRandomInit = 5,
};

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng gen = make_rng(seed, stream);
  return gen();
}

}  // namespace detail

/// Atoms |a_k u + b_k + nu sinc(pi/6 u - e) + mu (tri(u - f + 2) - tri(u - f - 2))|
/// for u = 1..L, with (a_k, b_k) shared inside each class, normalized to unit
/// norm. Near-collinear atoms are redrawn.
inline Dictionary gen_dictionary(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Index L = spec.dims.L, d = spec.atoms, per_class = spec.atoms / spec.classes;
  Rng gen = make_rng(seed, detail::kStreamDictionary);
  const double invL = 1.0 / static_cast<double>(L);
  std::uniform_real_distribution<double> slope(-invL, invL), offset(-1.0, 1.0),
      feature(-0.25, 0.25);
  std::uniform_int_distribution<Index> position(1, L);

  std::vector<double> a(static_cast<std::size_t>(spec.classes)), b(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    a[k] = slope(gen);
    b[k] = offset(gen);
  }
  Matrix atoms(L, d);
  std::vector<int> labels(static_cast<std::size_t>(d));
  auto draw = [&](Index j) {
    const auto k = static_cast<std::size_t>(j / per_class);
    const double nu = feature(gen), mu = feature(gen);
    const auto e = static_cast<double>(position(gen));
    const auto f = static_cast<double>(position(gen));
    for (Index i = 0; i < L; ++i) {
      const auto u = static_cast<double>(i + 1);
      atoms(i, j) = std::abs(a[k] * u + b[k] + nu * detail::sinc(std::numbers::pi / 6.0 * u - e) +
                             mu * (detail::tri(u - f + 2.0) - detail::tri(u - f - 2.0)));
    }
  };
  for (Index j = 0; j < d; ++j) {
    labels[static_cast<std::size_t>(j)] = static_cast<int>(j / per_class);
    draw(j);
  }

  constexpr int kMaxRounds = 100;
  for (int round = 0;; ++round) {
    bool redrawn = false;
    for (Index j = 0; j < d; ++j) {
      if (atoms.col(j).norm() == 0.0) {
        draw(j);
        redrawn = true;
      }
    }
    Matrix unit = atoms;
    normalize_columns(unit);
    const Matrix cos = unit.transpose() * unit;
    for (Index j = 1; j < d; ++j) {
      for (Index i = 0; i < j; ++i) {
        if (std::abs(cos(i, j)) >= 1.0 - 1e-12) {
          draw(j);
          redrawn = true;
          break;
        }
      }
    }
    if (!redrawn) break;
    if (round + 1 >= kMaxRounds) throw NumericalError("gen_dictionary: could not remove collinear atoms");
  }
  normalize_columns(atoms);
  return Dictionary(std::move(atoms), std::move(labels));
}

/// Largest |cosine| between two atoms of the same class.
inline double max_intra_class_cosine(const Dictionary& dict) {
  if (!dict.class_labels()) throw ModelError("dictionary has no class labels");
  const auto& labels = *dict.class_labels();
  Matrix unit = dict.atoms();
  normalize_columns(unit);
  const Matrix cos = unit.transpose() * unit;
  double best = 0.0;
  for (Index j = 1; j < cos.cols(); ++j)
    for (Index i = 0; i < j; ++i)
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)])
        best = std::max(best, std::abs(cos(i, j)));
  return best;
}

struct SynthTruth {
  Factors factors;
  Selection selection;
};

/// Unit-column Gaussian A and C; B holds one atom from each of R distinct
/// classes, chosen uniformly within its class.
inline SynthTruth gen_factors(const SynthSpec& spec, const Dictionary& dict, std::uint64_t seed) {
  spec.validate();
  if (dict.size() != spec.atoms || dict.atom_dim() != spec.dims.L) {
    throw ModelError("gen_factors: dictionary shape does not match the synthetic setup");
  }
  Rng gen = make_rng(seed, detail::kStreamFactors);
  SynthTruth truth;
  truth.factors.A = random_normal(spec.dims.K, spec.rank, gen);
  truth.factors.C = random_normal(spec.dims.M, spec.rank, gen);
  normalize_columns(truth.factors.A);
  normalize_columns(truth.factors.C);
  std::vector<Index> classes(static_cast<std::size_t>(spec.classes));
  std::iota(classes.begin(), classes.end(), Index{0});
  std::shuffle(classes.begin(), classes.end(), gen);
  const Index per_class = spec.atoms / spec.classes;
  std::uniform_int_distribution<Index> within(0, per_class - 1);
  for (Index r = 0; r < spec.rank; ++r) {
    truth.selection.indices.push_back(classes[static_cast<std::size_t>(r)] * per_class + within(gen));
    truth.selection.signs.push_back(1);
  }
  truth.factors.B = project(truth.selection, dict);
  return truth;
}

/// C (rho I + (1 - rho)/R 1 1^T), columns renormalized.
inline Matrix condition_C(const Matrix& c, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ModelError("rho must lie in [0, 1]");
  const Index R = c.cols();
  Matrix mix = Matrix::Constant(R, R, (1.0 - rho) / static_cast<double>(R));
  mix.diagonal().array() += rho;
  Matrix out = c * mix;
  normalize_columns(out);
  return out;
}

/// Fraction of atoms shared by both selections (maximum matching on equal
/// indices) over max(R, Re).
inline double identification_rate(const Selection& truth, const Selection& est, Index R, Index Re) {
  if (truth.rank() != R || est.rank() != Re) throw ModelError("identification_rate: rank mismatch");
  std::map<Index, int> count;
  for (Index i : truth.indices) ++count[i];
  int matched = 0;
  for (Index j : est.indices) {
    auto it = count.find(j);
    if (it != count.end() && it->second > 0) {
      --it->second;
      ++matched;
    }
  }
  return static_cast<double>(matched) / static_cast<double>(std::max(R, Re));
}

inline double oracle_rate(Index R, Index Re) {
  if (R < 1 || Re < 1) throw ModelError("oracle_rate: ranks must be positive");
  return static_cast<double>(std::min(R, Re)) / static_cast<double>(std::max(R, Re));
}

/// |Re - R| / max(Re, R): the fraction of columns that cannot be matched.
inline double oracle_miss(Index R, Index Re) {
  if (R < 1 || Re < 1) throw ModelError("oracle_miss: ranks must be positive");
  return static_cast<double>(std::abs(Re - R)) / static_cast<double>(std::max(R, Re));
}

/// min over column matchings and per-column scalings of
/// |B - B_est Pi|_F^2 / |B|_F^2. Unmatched true columns count fully.
inline double rmse_B(const Matrix& b_true, const Matrix& b_est) {
  if (b_true.rows() != b_est.rows()) throw ModelError("rmse_B: row counts differ");
  const double total = b_true.squaredNorm();
  if (total == 0.0) throw ModelError("rmse_B: true factor is zero");
  // gain(i, j) = reduction of |b_i|^2 achieved by the best multiple of est_j.
  Matrix gain = b_true.transpose() * b_est;
  for (Index j = 0; j < b_est.cols(); ++j) {
    const double n2 = b_est.col(j).squaredNorm();
    gain.col(j) = n2 > 0.0 ? Vector(gain.col(j).array().square() / n2) : Vector::Zero(gain.rows());
  }
  const double matched = gain.rows() <= gain.cols() ? assignment_max(gain).total_score
                                                    : assignment_max(gain.transpose()).total_score;
  return std::max(0.0, total - matched) / total;
}

// --- Experiment grid ----------------------------------------------------------

enum class GridKind { kRank, kRho };

inline std::string grid_param(GridKind g) { return g == GridKind::kRank ? "Re" : "rho"; }

inline const std::vector<std::string>& bench_solver_names() {
  static const std::vector<std::string> names{"als-proj", "mpals",  "smpals",
                                              "flex-mpals", "als-fg", "rand-mpals"};
  return names;
}

struct TrialRecord {
  std::string solver;
  int trial = 0;
  double id_rate = 0.0;
  double rmse_b = 0.0;
  double rel_err = 0.0;
  double runtime_s = 0.0;
  double snr_db = 0.0;
  bool failed = false;
  std::string error;
};

struct CellSummary {
  std::string solver;
  int count = 0;
  int failures = 0;
  double mean_id_rate = 0.0, std_id_rate = 0.0;
  double mean_rmse_b = 0.0, std_rmse_b = 0.0;
  double mean_rel_err = 0.0, std_rel_err = 0.0;
  double mean_runtime_s = 0.0, std_runtime_s = 0.0;
  bool flagged = false;
};

struct GridCell {
  double value = 0.0;  ///< Re or rho
  Index re = 0;
  double rho = 1.0;
  double oracle = 1.0;
  double mean_snr_db = 0.0;
  std::vector<TrialRecord> records;  ///< ordered by (trial, solver)
  std::vector<CellSummary> summary;  ///< one per solver, in solver order
};

struct ExperimentReport {
  GridKind grid = GridKind::kRank;
  SynthSpec spec;
  std::vector<std::string> solvers;
  double dictionary_max_intra_cosine = 0.0;
  std::vector<GridCell> cells;
};

struct GridOptions {
  SolverConfig solver;      ///< rank is overridden per cell
  int random_init_factor = 5;  ///< iteration cap multiplier for rand-mpals
  int jobs = 1;
  bool timing = false;
};

inline GridOptions default_grid_options() {
  GridOptions opt;
  opt.solver.max_outer_iters = 1000;
  opt.solver.stop_tol = 1e-4;
  opt.solver.lambda = 0.04;
  opt.solver.p = 1.1;
  return opt;
}

namespace detail {

inline std::vector<TrialRecord> run_trial(const SynthSpec& spec, const Dictionary& dict, Index re,
                                          double rho, int trial, const std::vector<std::string>& solvers,
                                          const GridOptions& opt) {
  const std::uint64_t tseed = spec.seed ^ static_cast<std::uint64_t>(trial);
  SynthTruth truth = gen_factors(spec, dict, tseed);
  truth.factors.C = condition_C(truth.factors.C, rho);
  const NoisyTensor data = add_gaussian_noise(cpd_reconstruct(truth.factors), spec.sigma,
                                              stream_seed(tseed, kStreamNoise));
  const Tensor3& t = data.tensor;
  SolverConfig cfg = opt.solver;
  cfg.rank = re;
  cfg.seed = tseed;

  std::vector<TrialRecord> out;
  std::optional<FitReport> als;
  auto als_result = [&]() -> const FitReport& {
    if (!als) als = als_cpd(t, cfg, init_random(spec.dims, re, stream_seed(tseed, kStreamAlsInit)));
    return *als;
  };
  for (const std::string& name : solvers) {
    TrialRecord rec;
    rec.solver = name;
    rec.trial = trial;
    rec.snr_db = data.snr_db;
    try {
      FitReport rep;
      if (name == "als-proj") {
        rep = project_fit(t, cfg, als_result(), dict);
      } else if (name == "rand-mpals") {
        SolverConfig rc = cfg;
        rc.max_outer_iters = cfg.max_outer_iters * opt.random_init_factor;
        SynthSpec draw = spec;
        draw.rank = re;
        Factors start = gen_factors(draw, dict, stream_seed(tseed, kStreamRandomInit)).factors;
        start.C = condition_C(start.C, rho);
        rep = mpals(t, rc, start, dict);
      } else {
        const auto kind = parse_solver(name);
        if (!kind) throw ModelError("unknown benchmark solver " + name);
        rep = solve(*kind, t, cfg, als_result().factors, dict);
      }
      rec.runtime_s = rep.wall_time;
      rec.id_rate = identification_rate(truth.selection, rep.selection, spec.rank, re);
      rec.rmse_b = rmse_B(truth.factors.B, project(rep.selection, dict));
      rec.rel_err = rep.rel_err;
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline void summarize(GridCell& cell, const std::vector<std::string>& solvers) {
  cell.summary.clear();
  double snr = 0.0;
  int snr_count = 0;
  for (const auto& name : solvers) {
    CellSummary s;
    s.solver = name;
    std::vector<const TrialRecord*> ok;
    for (const auto& r : cell.records) {
      if (r.solver != name) continue;
      ++s.count;
      if (r.failed) ++s.failures; else ok.push_back(&r);
    }
    auto stats = [&](auto field, double& mean, double& sd) {
      mean = sd = 0.0;
      if (ok.empty()) return;
      for (const auto* r : ok) mean += field(*r);
      mean /= static_cast<double>(ok.size());
      for (const auto* r : ok) sd += (field(*r) - mean) * (field(*r) - mean);
      sd = ok.size() > 1 ? std::sqrt(sd / static_cast<double>(ok.size() - 1)) : 0.0;
    };
    stats([](const TrialRecord& r) { return r.id_rate; }, s.mean_id_rate, s.std_id_rate);
    stats([](const TrialRecord& r) { return r.rmse_b; }, s.mean_rmse_b, s.std_rmse_b);
    stats([](const TrialRecord& r) { return r.rel_err; }, s.mean_rel_err, s.std_rel_err);
    stats([](const TrialRecord& r) { return r.runtime_s; }, s.mean_runtime_s, s.std_runtime_s);
    s.flagged = s.failures * 10 > s.count;
    cell.summary.push_back(s);
  }
  for (const auto& r : cell.records) {
    if (r.solver == solvers.front() && std::isfinite(r.snr_db)) {
      snr += r.snr_db;
      ++snr_count;
    }
  }
  cell.mean_snr_db = snr_count ? snr / snr_count : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Runs every (cell, trial) of the grid. Trials are independent tasks
/// executed on `opt.jobs` threads; results are keyed by (cell, trial) so the
/// report does not depend on scheduling.
inline ExperimentReport run_grid(const SynthSpec& spec, GridKind grid,
                                 const std::vector<std::string>& solvers,
                                 const GridOptions& opt = default_grid_options()) {
  spec.validate();
  opt.solver.validate();
  if (solvers.empty()) throw ModelError("run_grid: empty solver list");
  for (const auto& s : solvers) {
    if (std::find(bench_solver_names().begin(), bench_solver_names().end(), s) ==
        bench_solver_names().end()) {
      throw ModelError("unknown benchmark solver '" + s + "'");
    }
  }
  ExperimentReport rep;
  rep.grid = grid;
  rep.spec = spec;
  rep.solvers = solvers;
  const Dictionary dict = gen_dictionary(spec, spec.seed);
  rep.dictionary_max_intra_cosine = max_intra_class_cosine(dict);

  if (grid == GridKind::kRank) {
    for (Index re : spec.re_values) {
      GridCell c;
      c.value = static_cast<double>(re);
      c.re = re;
      c.rho = 1.0;
      rep.cells.push_back(c);
    }
  } else {
    for (double rho : spec.rho_values) {
      GridCell c;
      c.value = rho;
      c.re = spec.rank;
      c.rho = rho;
      rep.cells.push_back(c);
    }
  }
  for (auto& c : rep.cells) c.oracle = oracle_rate(spec.rank, c.re);

  const std::size_t ntrials = static_cast<std::size_t>(spec.trials);
  std::vector<std::vector<TrialRecord>> results(rep.cells.size() * ntrials);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t task = next++; task < results.size(); task = next++) {
      const auto& cell = rep.cells[task / ntrials];
      results[task] = detail::run_trial(spec, dict, cell.re, cell.rho,
                                        static_cast<int>(task % ntrials), solvers, opt);
    }
  };
  const int jobs = std::max(1, opt.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t ci = 0; ci < rep.cells.size(); ++ci) {
    for (std::size_t tr = 0; tr < ntrials; ++tr) {
      auto& recs = results[ci * ntrials + tr];
      if (!opt.timing)
        for (auto& r : recs) r.runtime_s = 0.0;
      rep.cells[ci].records.insert(rep.cells[ci].records.end(), recs.begin(), recs.end());
    }
    detail::summarize(rep.cells[ci], solvers);
  }
  return rep;
}

// --- Report emission ------------------------------------------------------------

inline std::string format_grid_value(GridKind g, double v) {
  if (g == GridKind::kRank) return std::to_string(static_cast<long long>(v));
  return io::format_double(v);
}

/// grid_param,value,solver,trial,id_rate,rmse_B,rel_err,runtime_s
/// (runtime_s is "NA" unless timing was requested).
inline std::string report_csv(const ExperimentReport& rep, bool timing) {
  std::ostringstream os;
  os << "grid_param,value,solver,trial,id_rate,rmse_B,rel_err,runtime_s\n";
  for (const auto& c : rep.cells) {
    for (const auto& r : c.records) {
      os << grid_param(rep.grid) << ',' << format_grid_value(rep.grid, c.value) << ',' << r.solver
         << ',' << r.trial << ',';
      if (r.failed) {
        os << "NA,NA,NA,NA\n";
        continue;
      }
      os << io::format_double(r.id_rate) << ',' << io::format_double(r.rmse_b) << ','
         << io::format_double(r.rel_err) << ','
         << (timing ? io::format_double(r.runtime_s) : std::string("NA")) << '\n';
    }
  }
  return os.str();
}

inline nlohmann::json report_json(const ExperimentReport& rep, bool timing) {
  using nlohmann::json;
  json j;
  j["grid_param"] = grid_param(rep.grid);
  j["spec"] = {{"dims", {rep.spec.dims.K, rep.spec.dims.L, rep.spec.dims.M}},
               {"atoms", rep.spec.atoms},
               {"classes", rep.spec.classes},
               {"rank", rep.spec.rank},
               {"sigma", rep.spec.sigma},
               {"trials", rep.spec.trials},
               {"seed", rep.spec.seed}};
  j["solvers"] = rep.solvers;
  j["dictionary_max_intra_class_cosine"] = rep.dictionary_max_intra_cosine;
  json cells = json::array();
  for (const auto& c : rep.cells) {
    json jc;
    jc["value"] = c.value;
    jc["oracle"] = c.oracle;
    jc["oracle_miss"] = oracle_miss(rep.spec.rank, c.re);
    jc["mean_snr_db"] = std::isfinite(c.mean_snr_db) ? json(c.mean_snr_db) : json(nullptr);
    json per = json::object();
    for (const auto& s : c.summary) {
      json js = {{"trials", s.count},
                 {"failures", s.failures},
                 {"flagged", s.flagged},
                 {"id_rate", {{"mean", s.mean_id_rate}, {"std", s.std_id_rate}}},
                 {"rmse_B", {{"mean", s.mean_rmse_b}, {"std", s.std_rmse_b}}},
                 {"rel_err", {{"mean", s.mean_rel_err}, {"std", s.std_rel_err}}}};
      if (timing) js["runtime_s"] = {{"mean", s.mean_runtime_s}, {"std", s.std_runtime_s}};
      per[s.solver] = js;
    }
    jc["solvers"] = per;
    cells.push_back(jc);
  }
  j["cells"] = cells;
  return j;
}

/// Whitespace-separated table: value, oracle, then one mean column per solver.
inline std::string report_dat(const ExperimentReport& rep, bool rmse) {
  std::ostringstream os;
  os << "# " << grid_param(rep.grid) << " oracle";
  for (const auto& s : rep.solvers) os << ' ' << s;
  os << '\n';
  for (const auto& c : rep.cells) {
    os << format_grid_value(rep.grid, c.value) << ' ' << io::format_double(c.oracle);
    for (const auto& s : c.summary) os << ' ' << io::format_double(rmse ? s.mean_rmse_b : s.mean_id_rate);
    os << '\n';
  }
  return os.str();
}

inline std::string gnuplot_script(const ExperimentReport& rep, const std::string& dat_file,
                                  const std::string& png_file, bool rmse) {
  std::ostringstream os;
  const bool rank = rep.grid == GridKind::kRank;
  os << "set terminal pngcairo size 800,600\n"
     << "set output '" << png_file << "'\n"
     << "set xlabel '" << (rank ? "estimated rank Re" : "rho") << "'\n"
     << "set ylabel '" << (rmse ? "relative MSE on B" : "identification rate") << "'\n"
     << "set key outside right\n"
     << "set grid\n";
  if (rmse) os << "set logscale y\n";
  os << "plot ";
  std::size_t col = 3;
  if (!rmse) {
    os << "'" << dat_file << "' using 1:2 with lines dashtype 2 lw 2 title 'oracle', \\\n     ";
  }
  for (std::size_t i = 0; i < rep.solvers.size(); ++i, ++col) {
    os << "'" << dat_file << "' using 1:" << col << " with linespoints title '" << rep.solvers[i]
       << "'";
    os << (i + 1 < rep.solvers.size() ? ", \\\n     " : "\n");
  }
  return os.str();
}

}  // namespace dcpd
