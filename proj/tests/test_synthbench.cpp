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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"

namespace dcpd {
namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.dims = {6, 12, 4};
  s.atoms = 40;
  s.classes = 8;
  s.rank = 3;
  s.re_values = {2, 3, 4};
  s.rho_values = {0.5, 1.0};
  s.sigma = 0.01;
  s.trials = 3;
  s.seed = 21;
  return s;
}

TEST(SynthSpec, Validation) {
  SynthSpec s = small_spec();
  EXPECT_NO_THROW(s.validate());
  s.classes = 7;
  EXPECT_THROW(s.validate(), ModelError);
  s = small_spec();
  s.rank = 9;
  EXPECT_THROW(s.validate(), ModelError);
  s = small_spec();
  s.rho_values = {1.5};
  EXPECT_THROW(s.validate(), ModelError);
  s = small_spec();
  s.sigma = -1.0;
  EXPECT_THROW(s.validate(), ModelError);
}

TEST(GenDictionary, NonnegativeUnitNormLabelledDeterministic) {
  const SynthSpec s = small_spec();
  const Dictionary a = gen_dictionary(s, 4);
  const Dictionary b = gen_dictionary(s, 4);
  EXPECT_EQ(a.atoms(), b.atoms());
  EXPECT_TRUE(a.nonnegative());
  EXPECT_TRUE(a.unit_norm());
  ASSERT_TRUE(a.class_labels().has_value());
  const auto& labels = *a.class_labels();
  for (Index j = 0; j < s.atoms; ++j) EXPECT_EQ(labels[static_cast<std::size_t>(j)], j / (s.atoms / s.classes));
  const double cos = max_intra_class_cosine(a);
  EXPECT_GT(cos, 0.5);
  EXPECT_LT(cos, 1.0 - 1e-12);
}

TEST(GenDictionary, FullSizeIntraClassCorrelationIsHigh) {
  const Dictionary d = gen_dictionary(SynthSpec{}, 0);
  EXPECT_EQ(d.size(), 1000);
  EXPECT_EQ(d.atom_dim(), 50);
  EXPECT_GT(max_intra_class_cosine(d), 0.99);
}

TEST(GenDictionary, SubsampledSparkExceedsRank) {
  SynthSpec s = small_spec();
  s.atoms = 24;
  s.classes = 6;
  const Dictionary d = gen_dictionary(s, 5);
  EXPECT_EQ(spark_bruteforce(d.atoms(), 4), std::nullopt);
}

TEST(GenFactors, OneAtomPerDistinctClass) {
  const SynthSpec s = small_spec();
  const Dictionary dict = gen_dictionary(s, 1);
  const SynthTruth t = gen_factors(s, dict, 9);
  const SynthTruth again = gen_factors(s, dict, 9);
  EXPECT_EQ(t.selection, again.selection);
  std::set<int> classes;
  for (Index i : t.selection.indices) classes.insert((*dict.class_labels())[static_cast<std::size_t>(i)]);
  EXPECT_EQ(classes.size(), static_cast<std::size_t>(s.rank));
  for (Index r = 0; r < s.rank; ++r) {
    EXPECT_NEAR(t.factors.A.col(r).norm(), 1.0, 1e-12);
    EXPECT_NEAR(t.factors.C.col(r).norm(), 1.0, 1e-12);
  }
  EXPECT_EQ(t.factors.B, project(t.selection, dict));
}

TEST(ConditionC, Examples) {
  std::mt19937_64 gen(2);
  const Matrix c = testing::gaussian(5, 2, gen);
  EXPECT_LE((condition_C(c, 1.0) - testing::unit_columns(c)).norm(), 1e-14);
  const Matrix r0 = condition_C(c, 0.0);
  EXPECT_LE((r0.col(0) - r0.col(1)).norm(), 1e-14);
  Matrix mix(2, 2);
  mix << 0.75, 0.25, 0.25, 0.75;
  EXPECT_LE((condition_C(c, 0.5) - testing::unit_columns(c * mix)).norm(), 1e-14);
  EXPECT_THROW(condition_C(c, 1.1), ModelError);
}

TEST(Metrics, IdentificationRate) {
  const Selection truth = testing::positive_selection({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  EXPECT_EQ(identification_rate(truth, truth, 10, 10), 1.0);
  const Selection seven = testing::positive_selection({1, 2, 3, 4, 5, 6, 7});
  EXPECT_DOUBLE_EQ(identification_rate(truth, seven, 10, 7), 0.7);
  const Selection none = testing::positive_selection({20, 21, 22, 23, 24, 25, 26, 27, 28, 29});
  EXPECT_EQ(identification_rate(truth, none, 10, 10), 0.0);
  // Duplicates earn credit only once.
  const Selection dup = testing::positive_selection({1, 1, 1});
  EXPECT_DOUBLE_EQ(identification_rate(testing::positive_selection({1, 2, 3}), dup, 3, 3), 1.0 / 3.0);
  EXPECT_THROW(identification_rate(truth, seven, 10, 10), ModelError);
}

TEST(Metrics, OracleForms) {
  EXPECT_EQ(oracle_rate(10, 10), 1.0);
  EXPECT_DOUBLE_EQ(oracle_rate(10, 7), 0.7);
  EXPECT_DOUBLE_EQ(oracle_rate(10, 13), 10.0 / 13.0);
  EXPECT_DOUBLE_EQ(oracle_miss(10, 7), 0.3);
  EXPECT_EQ(oracle_miss(10, 10), 0.0);
  EXPECT_THROW(oracle_rate(0, 3), ModelError);
}

TEST(Metrics, RmseExamples) {
  std::mt19937_64 gen(3);
  const Matrix b = testing::gaussian(6, 3, gen);
  Matrix perm(6, 3);
  perm.col(0) = b.col(2);
  perm.col(1) = -4.0 * b.col(0);
  perm.col(2) = b.col(1);
  EXPECT_NEAR(rmse_B(b, perm), 0.0, 1e-14);
  EXPECT_NEAR(rmse_B(b, -b), 0.0, 1e-14);
  EXPECT_NEAR(rmse_B(b, Matrix::Zero(6, 3)), 1.0, 1e-15);
  EXPECT_THROW(rmse_B(Matrix::Zero(6, 3), b), ModelError);
}

TEST(Metrics, RmseMatchesPermutationBruteForceProperty) {
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<Index> rank(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const Index R = rank(gen);
    const Matrix b = testing::gaussian(7, R, gen);
    const Matrix est = testing::gaussian(7, R, gen);
    EXPECT_NEAR(rmse_B(b, est), testing::brute_rmse(b, est), 1e-12) << "trial " << trial;
  }
}

TEST(Metrics, RmseRankMismatchCountsUnmatchedColumns) {
  std::mt19937_64 gen(5);
  const Matrix b = testing::gaussian(6, 3, gen);
  // Two of three true columns estimated exactly: the third is fully missed.
  const Matrix est = b.leftCols(2);
  EXPECT_NEAR(rmse_B(b, est), b.col(2).squaredNorm() / b.squaredNorm(), 1e-14);
  Matrix extra(6, 4);
  extra << b, testing::gaussian(6, 1, gen);
  EXPECT_NEAR(rmse_B(b, extra), 0.0, 1e-14);
}

TEST(Bench, NoiselessTruthInitializedSolversIdentifyEverything) {
  SynthSpec s = small_spec();
  s.sigma = 0.0;
  const Dictionary dict = gen_dictionary(s, 7);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SynthTruth truth = gen_factors(s, dict, seed);
    const Tensor3 t = cpd_reconstruct(truth.factors);
    SolverConfig cfg;
    cfg.rank = s.rank;
    for (SolverKind kind : {SolverKind::kProjectedAls, SolverKind::kMpals, SolverKind::kSmpals,
                            SolverKind::kFlexMpals, SolverKind::kAlsFg}) {
      const FitReport rep = solve(kind, t, cfg, truth.factors, dict);
      EXPECT_EQ(identification_rate(truth.selection, rep.selection, s.rank, s.rank), 1.0)
          << solver_name(kind);
      EXPECT_NEAR(rmse_B(truth.factors.B, project(rep.selection, dict)), 0.0, 1e-20);
    }
  }
}

TEST(Bench, GridIsDeterministicAcrossJobCounts) {
  const SynthSpec s = small_spec();
  GridOptions one = default_grid_options();
  one.solver.max_outer_iters = 100;
  GridOptions three = one;
  three.jobs = 3;
  const std::vector<std::string> solvers = bench_solver_names();
  const ExperimentReport a = run_grid(s, GridKind::kRank, solvers, one);
  const ExperimentReport b = run_grid(s, GridKind::kRank, solvers, three);
  EXPECT_EQ(report_csv(a, false), report_csv(b, false));
  EXPECT_EQ(report_json(a, false).dump(), report_json(b, false).dump());
  EXPECT_EQ(report_dat(a, false), report_dat(b, false));
}

TEST(Bench, ReportShapes) {
  SynthSpec s = small_spec();
  s.trials = 2;
  GridOptions opt = default_grid_options();
  opt.solver.max_outer_iters = 50;
  const std::vector<std::string> solvers{"als-proj", "mpals"};
  const ExperimentReport rep = run_grid(s, GridKind::kRho, solvers, opt);
  ASSERT_EQ(rep.cells.size(), 2u);
  for (const GridCell& c : rep.cells) {
    EXPECT_EQ(c.records.size(), 4u);
    ASSERT_EQ(c.summary.size(), 2u);
    for (const CellSummary& cs : c.summary) {
      EXPECT_GE(cs.mean_id_rate, 0.0);
      EXPECT_LE(cs.mean_id_rate, 1.0);
      EXPECT_EQ(cs.count, 2);
    }
  }
  const std::string csv = report_csv(rep, false);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "grid_param,value,solver,trial,id_rate,rmse_B,rel_err,runtime_s");
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  EXPECT_EQ(lines, 1u + 2u * 2u * 2u);
  EXPECT_NE(csv.find("rho,0.5,mpals,1,"), std::string::npos);
  EXPECT_NE(csv.find(",NA\n"), std::string::npos);
  const auto json = report_json(rep, false);
  EXPECT_EQ(json["grid_param"], "rho");
  EXPECT_FALSE(json["cells"][0]["solvers"]["mpals"].contains("runtime_s"));
  EXPECT_EQ(json["cells"][1]["solvers"]["als-proj"]["trials"], 2);
  const std::string gp = gnuplot_script(rep, "x.dat", "x.png", true);
  EXPECT_NE(gp.find("x.dat"), std::string::npos);
  EXPECT_NE(gp.find("x.png"), std::string::npos);
}

TEST(Bench, UnknownSolverAndBadGrid) {
  const SynthSpec s = small_spec();
  EXPECT_THROW(run_grid(s, GridKind::kRank, {"bogus"}, default_grid_options()), ModelError);
  EXPECT_THROW(run_grid(s, GridKind::kRank, {}, default_grid_options()), ModelError);
}

}  // namespace
}  // namespace dcpd
