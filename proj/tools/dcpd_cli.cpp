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

// Command-line front end: decompose, synth, unmix, spark, generate.
//
// Exit codes: 0 success, 1 I/O error, 2 validation or model error,
// 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dcpd.hpp"

namespace fs = std::filesystem;
using dcpd::Index;
using Json = nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kIo = 1, kModel = 2, kNumerical = 3 };

struct SolverFlags {
  int max_iters = 1000;
  double stop_tol = 1e-4;
  bool nonneg = false;
  bool no_repeat = false;
  double lambda = 0.04;
  double p = 1.1;
  double delta_max = 0.1;
  int fg_inner = 10;
  double fg_alpha0 = 0.05;
  bool lipschitz_squared = false;
  bool normalize_a = false;

  void add_to(CLI::App* app) {
    app->add_option("--max-iters", max_iters, "Maximum outer iterations")->capture_default_str();
    app->add_option("--stop-tol", stop_tol, "Relative cost-change stopping tolerance")
        ->capture_default_str();
    app->add_flag("--nonneg", nonneg, "Nonnegative factors (NNLS updates)");
    app->add_flag("--no-repeat", no_repeat, "Forbid selecting an atom twice");
    app->add_option("--lambda", lambda, "Coupling strength (Flex-MPALS, initial for SMPALS)")
        ->capture_default_str();
    app->add_option("--p", p, "SMPALS lambda growth factor")->capture_default_str();
    app->add_option("--delta-max", delta_max, "ALS-FG final l1 weight")->capture_default_str();
    app->add_option("--fg-inner", fg_inner, "Fast-gradient steps per outer iteration")
        ->capture_default_str();
    app->add_option("--fg-alpha0", fg_alpha0, "Initial fast-gradient momentum parameter")
        ->capture_default_str();
    app->add_flag("--lipschitz-squared", lipschitz_squared,
                  "Use the product of squared eigenvalues as ALS-FG Lipschitz constant");
    app->add_flag("--normalize-a", normalize_a, "Normalize the columns of A after each update");
  }

  dcpd::SolverConfig config(Index rank, std::uint64_t seed) const {
    dcpd::SolverConfig cfg;
    cfg.rank = rank;
    cfg.max_outer_iters = max_iters;
    cfg.stop_tol = stop_tol;
    cfg.nonneg = nonneg;
    cfg.no_repeat = no_repeat;
    cfg.lambda = lambda;
    cfg.p = p;
    cfg.delta_max = delta_max;
    cfg.fg_inner_iters = fg_inner;
    cfg.fg_alpha0 = fg_alpha0;
    cfg.lipschitz_squared = lipschitz_squared;
    cfg.normalize_A = normalize_a;
    cfg.seed = seed;
    return cfg;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw dcpd::IoError("cannot create output directory " + dir.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Index> parse_rank_list(const std::string& s) {
  std::vector<Index> out;
  try {
    const auto dots = s.find("..");
    if (dots != std::string::npos) {
      const long lo = std::stol(s.substr(0, dots));
      const long hi = std::stol(s.substr(dots + 2));
      if (hi < lo) throw dcpd::ModelError("empty rank range " + s);
      for (long r = lo; r <= hi; ++r) out.push_back(r);
    } else {
      for (const auto& item : split_list(s)) out.push_back(std::stol(item));
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const dcpd::ModelError*>(&e)) throw;
    throw dcpd::ModelError("cannot parse rank list '" + s + "'");
  }
  if (out.empty()) throw dcpd::ModelError("empty rank list");
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    double v;
    if (!dcpd::io::detail::parse_double(item, v)) throw dcpd::ModelError("cannot parse number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw dcpd::ModelError("empty list");
  return out;
}

Json runtime_json(bool timing, double seconds) { return timing ? Json(seconds) : Json(nullptr); }

void write_cost_trace(const fs::path& path, const std::vector<double>& trace) {
  std::string text = "iteration,cost\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    text += std::to_string(i + 1) + "," + dcpd::io::format_double(trace[i]) + "\n";
  dcpd::io::write_text(path, text);
}

// --- decompose ----------------------------------------------------------------

struct DecomposeArgs {
  std::string tensor, dict, labels, solver, out, init = "als";
  Index rank = 10;
  std::uint64_t seed = 0;
  bool timing = false;
  SolverFlags flags;
};

int cmd_decompose(const DecomposeArgs& a) {
  const auto kind = dcpd::parse_solver(a.solver);
  if (!kind) {
    std::cerr << "unknown solver '" << a.solver << "'; valid names: " << dcpd::solver_names() << "\n";
    return kModel;
  }
  const dcpd::Tensor3 t = dcpd::io::read_tensor(a.tensor);
  const dcpd::Dictionary dict = dcpd::io::read_dictionary(
      a.dict, a.labels.empty() ? std::nullopt : std::optional<fs::path>(a.labels));
  const dcpd::SolverConfig cfg = a.flags.config(a.rank, a.seed);
  cfg.validate();
  ensure_dir(a.out);

  dcpd::Factors init;
  if (a.init == "als" || a.init == "random") {
    init = dcpd::init_random(t.dims(), a.rank, a.seed);
    const bool dcpd_solver = *kind != dcpd::SolverKind::kAls && *kind != dcpd::SolverKind::kProjectedAls;
    if (a.init == "als" && dcpd_solver) init = dcpd::als_cpd(t, cfg, init).factors;
  } else {
    const fs::path dir(a.init);
    init = {dcpd::io::read_matrix(dir / "A.f64"), dcpd::io::read_matrix(dir / "B.f64"),
            dcpd::io::read_matrix(dir / "C.f64")};
    if (init.rank() != a.rank) {
      throw dcpd::ModelError("initial factors have rank " + std::to_string(init.rank()) +
                             " but --rank is " + std::to_string(a.rank));
    }
  }

  const dcpd::FitReport rep = dcpd::solve(*kind, t, cfg, init, dict);
  const fs::path out(a.out);
  dcpd::io::write_matrix(out / "A.f64", rep.factors.A);
  dcpd::io::write_matrix(out / "B.f64", rep.factors.B);
  dcpd::io::write_matrix(out / "C.f64", rep.factors.C);
  dcpd::io::write_json(out / "selection.json", dcpd::io::selection_to_json(rep.selection));
  write_cost_trace(out / "cost_trace.csv", rep.cost_trace);
  Json summary{{"solver", a.solver},
               {"rel_err", rep.rel_err},
               {"iterations", rep.iterations},
               {"converged", rep.converged},
               {"runtime_s", runtime_json(a.timing, rep.wall_time)},
               {"warnings", rep.warnings}};
  dcpd::io::write_json(out / "summary.json", summary);
  std::cout << a.solver << ": rel_err " << dcpd::io::format_double(rep.rel_err) << " after "
            << rep.iterations << " iterations" << (rep.converged ? " (converged)" : "") << "\n";
  return kOk;
}

// --- synth --------------------------------------------------------------------

struct SynthArgs {
  std::string out, grid = "both", re = "7..13", rho = "0.1,0.3,0.5,0.7,0.9,1.0";
  std::string solvers = "als-proj,mpals,smpals,flex-mpals,als-fg,rand-mpals";
  Index K = 20, L = 50, M = 7, atoms = 1000, classes = 50, rank = 10;
  double sigma = 0.01;
  int trials = 100, jobs = 1;
  std::uint64_t seed = 0;
  bool timing = false;
  SolverFlags flags;
};

void emit_grid(const fs::path& out, const std::string& tag, const dcpd::ExperimentReport& rep,
               bool timing) {
  dcpd::io::write_text(out / ("report_" + tag + ".csv"), dcpd::report_csv(rep, timing));
  dcpd::io::write_json(out / ("report_" + tag + ".json"), dcpd::report_json(rep, timing));
  dcpd::io::write_text(out / (tag + "_idrate.dat"), dcpd::report_dat(rep, false));
  dcpd::io::write_text(out / (tag + "_idrate.gp"),
                       dcpd::gnuplot_script(rep, tag + "_idrate.dat", tag + "_idrate.png", false));
  if (rep.grid == dcpd::GridKind::kRho) {
    dcpd::io::write_text(out / (tag + "_rmse.dat"), dcpd::report_dat(rep, true));
    dcpd::io::write_text(out / (tag + "_rmse.gp"),
                         dcpd::gnuplot_script(rep, tag + "_rmse.dat", tag + "_rmse.png", true));
  }
  for (const auto& c : rep.cells) {
    std::cout << dcpd::grid_param(rep.grid) << "=" << dcpd::format_grid_value(rep.grid, c.value)
              << " oracle=" << dcpd::io::format_double(c.oracle);
    for (const auto& s : c.summary) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  %s id=%.3f rmse=%.3g%s", s.solver.c_str(), s.mean_id_rate,
                    s.mean_rmse_b, s.flagged ? " [FLAGGED]" : "");
      std::cout << buf;
    }
    std::cout << "\n";
  }
}

int cmd_synth(const SynthArgs& a) {
  dcpd::SynthSpec spec;
  spec.dims = {a.K, a.L, a.M};
  spec.atoms = a.atoms;
  spec.classes = a.classes;
  spec.rank = a.rank;
  spec.sigma = a.sigma;
  spec.trials = a.trials;
  spec.seed = a.seed;
  spec.re_values = parse_rank_list(a.re);
  spec.rho_values = parse_double_list(a.rho);
  spec.validate();
  if (a.grid != "rank" && a.grid != "rho" && a.grid != "both") {
    throw dcpd::ModelError("--grid must be rank, rho or both");
  }
  dcpd::GridOptions opt = dcpd::default_grid_options();
  opt.solver = a.flags.config(a.rank, a.seed);
  opt.jobs = a.jobs;
  opt.timing = a.timing;
  const auto solvers = split_list(a.solvers);
  ensure_dir(a.out);
  if (a.grid != "rho") emit_grid(a.out, "rank", dcpd::run_grid(spec, dcpd::GridKind::kRank, solvers, opt), a.timing);
  if (a.grid != "rank") emit_grid(a.out, "rho", dcpd::run_grid(spec, dcpd::GridKind::kRho, solvers, opt), a.timing);
  return kOk;
}

// --- unmix --------------------------------------------------------------------

struct UnmixArgs {
  std::string hsi, out, init = "spa", solver = "mpals";
  Index rank = 0, height = 0, width = 0;
  int max_iters = 50;
  double stop_tol = 1e-4, lambda = 0.0, p = 1.5;
  bool timing = false;
};

int cmd_unmix(const UnmixArgs& a) {
  const auto kind = dcpd::parse_solver(a.solver);
  if (!kind) {
    std::cerr << "unknown solver '" << a.solver << "'; valid: mpals, smpals, flex-mpals\n";
    return kModel;
  }
  auto [values, meta] = dcpd::io::read_matrix_with_meta(a.hsi);
  dcpd::HsiMatrix hsi{std::move(values), std::nullopt};
  if (a.height > 0 || a.width > 0) {
    hsi.spatial = std::make_pair(a.height, a.width);
  } else if (meta.contains("height") && meta.contains("width")) {
    hsi.spatial = std::make_pair(meta["height"].get<Index>(), meta["width"].get<Index>());
  }
  hsi.validate();
  if (a.rank < 1 || a.rank > std::min(hsi.pixels(), hsi.bands())) {
    throw dcpd::ModelError("--rank must lie in [1, min(pixels, bands)] = [1, " +
                           std::to_string(std::min(hsi.pixels(), hsi.bands())) + "]");
  }
  dcpd::SolverConfig cfg = dcpd::selfdict_defaults(a.rank);
  cfg.max_outer_iters = a.max_iters;
  cfg.stop_tol = a.stop_tol;
  cfg.lambda = a.lambda;
  cfg.p = a.p;

  const auto init = a.init == "spa" ? dcpd::spa(hsi.values, a.rank) : dcpd::io::read_indices(a.init);
  const dcpd::UnmixResult res = dcpd::self_dcpd(hsi, a.rank, cfg, init, *kind);

  const fs::path out(a.out);
  ensure_dir(out);
  dcpd::io::write_matrix(out / "endmembers.f64", res.endmembers);
  dcpd::io::write_matrix(out / "abundances.f64", res.abundances);
  Json markers = Json::array();
  if (hsi.spatial) {
    const auto [h, w] = *hsi.spatial;
    dcpd::Matrix map(h, w);
    for (Index i = 0; i < hsi.pixels(); ++i) map(i / w, i % w) = res.residual_map(i);
    dcpd::io::write_matrix(out / "residual_map.f64", map);
    for (Index i : res.endmember_indices) markers.push_back({{"pixel", i}, {"row", i / w}, {"col", i % w}});
  } else {
    dcpd::io::write_matrix(out / "residual_map.f64", dcpd::Matrix(res.residual_map));
    for (Index i : res.endmember_indices) markers.push_back({{"pixel", i}});
  }
  dcpd::io::write_json(out / "markers.json", markers);
  const std::string init_label = a.init == "spa" ? "spa" : "file";
  dcpd::io::write_json(out / "indices.json",
                       Json{{"indices", res.endmember_indices}, {"init_indices", res.init_indices}});
  dcpd::io::write_json(out / "summary.json", Json{{"solver", a.solver},
                                                  {"init", init_label},
                                                  {"rel_err_init", res.init_rel_err},
                                                  {"rel_err", res.rel_err},
                                                  {"iterations", res.iterations},
                                                  {"runtime_s", runtime_json(a.timing, res.wall_time)}});
  std::cout << "rel_err " << init_label << "+nnls: " << dcpd::io::format_double(res.init_rel_err)
            << "\nrel_err after " << a.solver << ": " << dcpd::io::format_double(res.rel_err) << "\n";
  return kOk;
}

// --- spark --------------------------------------------------------------------

int cmd_spark(const std::string& path, Index kmax) {
  const dcpd::Matrix d = dcpd::io::read_matrix(path);
  const auto spark = dcpd::spark_bruteforce(d, kmax);
  if (spark) {
    std::cout << "spark = " << *spark << "\n";
  } else {
    std::cout << "spark exceeds kmax (" << kmax << ")\n";
  }
  return kOk;
}

// --- generate -----------------------------------------------------------------

struct GenerateArgs {
  std::string out;
  Index K = 20, L = 50, M = 7, atoms = 1000, classes = 50, rank = 10;
  double sigma = 0.01, rho = 1.0;
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a) {
  dcpd::SynthSpec spec;
  spec.dims = {a.K, a.L, a.M};
  spec.atoms = a.atoms;
  spec.classes = a.classes;
  spec.rank = a.rank;
  spec.sigma = a.sigma;
  spec.seed = a.seed;
  spec.validate();
  const dcpd::Dictionary dict = dcpd::gen_dictionary(spec, a.seed);
  dcpd::SynthTruth truth = dcpd::gen_factors(spec, dict, a.seed);
  truth.factors.C = dcpd::condition_C(truth.factors.C, a.rho);
  const auto data = dcpd::add_gaussian_noise(dcpd::cpd_reconstruct(truth.factors), a.sigma,
                                             dcpd::detail::stream_seed(a.seed, dcpd::detail::kStreamNoise));
  const fs::path out(a.out);
  ensure_dir(out / "truth");
  dcpd::io::write_tensor(out / "T.f64", data.tensor);
  dcpd::io::write_matrix(out / "D.f64", dict.atoms());
  dcpd::io::write_class_labels(out / "labels.csv", *dict.class_labels());
  dcpd::io::write_matrix(out / "truth" / "A.f64", truth.factors.A);
  dcpd::io::write_matrix(out / "truth" / "B.f64", truth.factors.B);
  dcpd::io::write_matrix(out / "truth" / "C.f64", truth.factors.C);
  dcpd::io::write_json(out / "truth" / "selection.json", dcpd::io::selection_to_json(truth.selection));
  dcpd::io::write_json(out / "instance.json",
                       Json{{"snr_db", std::isfinite(data.snr_db) ? Json(data.snr_db) : Json(nullptr)},
                            {"max_intra_class_cosine", dcpd::max_intra_class_cosine(dict)}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dictionary-constrained canonical polyadic decomposition"};
  app.set_config("--config", "", "Read options from a TOML/INI config file");
  app.require_subcommand(1);

  DecomposeArgs dec;
  auto* c_dec = app.add_subcommand("decompose", "Fit a dictionary-constrained CPD to a tensor");
  c_dec->add_option("--tensor", dec.tensor, "Tensor file (.f64 + sidecar)")->required();
  c_dec->add_option("--dict", dec.dict, "Dictionary matrix L x d (.f64 or .csv)")->required();
  c_dec->add_option("--labels", dec.labels, "Optional class labels CSV (atom_index,label)");
  c_dec->add_option("--solver", dec.solver, "One of: " + dcpd::solver_names())->required();
  c_dec->add_option("--rank", dec.rank, "Model rank R")->capture_default_str();
  c_dec->add_option("--out", dec.out, "Output directory")->required();
  c_dec->add_option("--init", dec.init, "als, random, or a directory with A.f64, B.f64, C.f64")
      ->capture_default_str();
  c_dec->add_option("--seed", dec.seed, "Random seed")->envname("DCPD_SEED")->capture_default_str();
  c_dec->add_flag("--timing", dec.timing, "Record wall-clock runtime in summary.json");
  dec.flags.add_to(c_dec);

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Run the synthetic benchmark grids");
  c_syn->add_option("--out", syn.out, "Output directory")->required();
  c_syn->add_option("--grid", syn.grid, "rank, rho or both")->capture_default_str();
  c_syn->add_option("--trials", syn.trials, "Trials per grid cell")->capture_default_str();
  c_syn->add_option("--Re", syn.re, "Estimated ranks, 'lo..hi' or a comma list")->capture_default_str();
  c_syn->add_option("--rho", syn.rho, "Conditioning values (comma list)")->capture_default_str();
  c_syn->add_option("--K", syn.K)->capture_default_str();
  c_syn->add_option("--L", syn.L)->capture_default_str();
  c_syn->add_option("--M", syn.M)->capture_default_str();
  c_syn->add_option("--atoms", syn.atoms, "Dictionary size d")->capture_default_str();
  c_syn->add_option("--classes", syn.classes, "Atom classes c")->capture_default_str();
  c_syn->add_option("--R", syn.rank, "True rank")->capture_default_str();
  c_syn->add_option("--sigma", syn.sigma, "Noise standard deviation")->capture_default_str();
  c_syn->add_option("--solvers", syn.solvers, "Comma-separated benchmark solvers")->capture_default_str();
  c_syn->add_option("--jobs", syn.jobs, "Concurrent trials")->capture_default_str();
  c_syn->add_option("--seed", syn.seed, "Base seed")->envname("DCPD_SEED")->capture_default_str();
  c_syn->add_flag("--timing", syn.timing, "Record wall-clock runtimes in the reports");
  syn.flags.add_to(c_syn);

  UnmixArgs unm;
  auto* c_unm = app.add_subcommand("unmix", "Self-dictionary unmixing of a pixels x bands matrix");
  c_unm->add_option("--hsi", unm.hsi, "HSI matrix n x L (.f64 or .csv)")->required();
  c_unm->add_option("--rank", unm.rank, "Number of endmembers")->required();
  c_unm->add_option("--init", unm.init, "spa or a JSON file of pixel indices")->capture_default_str();
  c_unm->add_option("--solver", unm.solver, "mpals, smpals or flex-mpals")->capture_default_str();
  c_unm->add_option("--out", unm.out, "Output directory")->required();
  c_unm->add_option("--height", unm.height, "Image height (pixels = height * width)");
  c_unm->add_option("--width", unm.width, "Image width");
  c_unm->add_option("--max-iters", unm.max_iters)->capture_default_str();
  c_unm->add_option("--stop-tol", unm.stop_tol)->capture_default_str();
  c_unm->add_option("--lambda", unm.lambda, "Coupling strength (0: automatic)")->capture_default_str();
  c_unm->add_option("--p", unm.p, "SMPALS growth factor")->capture_default_str();
  c_unm->add_flag("--timing", unm.timing, "Record wall-clock runtime in summary.json");

  std::string spark_path;
  Index kmax = 0;
  auto* c_spark = app.add_subcommand("spark", "Brute-force spark of a matrix up to kmax");
  c_spark->add_option("--matrix", spark_path, "Matrix file (.f64 or .csv)")->required();
  c_spark->add_option("--kmax", kmax, "Largest subset size to test")->required();

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Write a synthetic tensor, dictionary and truth");
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--K", gen.K)->capture_default_str();
  c_gen->add_option("--L", gen.L)->capture_default_str();
  c_gen->add_option("--M", gen.M)->capture_default_str();
  c_gen->add_option("--atoms", gen.atoms)->capture_default_str();
  c_gen->add_option("--classes", gen.classes)->capture_default_str();
  c_gen->add_option("--R", gen.rank)->capture_default_str();
  c_gen->add_option("--sigma", gen.sigma)->capture_default_str();
  c_gen->add_option("--rho", gen.rho)->capture_default_str();
  c_gen->add_option("--seed", gen.seed)->envname("DCPD_SEED")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kModel;
  }

  try {
    if (c_dec->parsed()) return cmd_decompose(dec);
    if (c_syn->parsed()) return cmd_synth(syn);
    if (c_unm->parsed()) return cmd_unmix(unm);
    if (c_spark->parsed()) return cmd_spark(spark_path, kmax);
    if (c_gen->parsed()) return cmd_generate(gen);
  } catch (const dcpd::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const dcpd::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModel;
  } catch (const dcpd::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kModel;
}
