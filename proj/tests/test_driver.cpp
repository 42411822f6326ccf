// SPDX-License-Identifier: Apache-2.0
#include "vphr/config.hpp"
#include "vphr/driver.hpp"
#include "vphr/metrics.hpp"

#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace vphr {
namespace {

namespace fs = std::filesystem;

RunConfig small_config(Model model) {
  RunConfig c = preset("nlld-desk");
  c.model = model;
  c.spec.particles = 400;
  c.spec.cells = 16;
  c.spec.parameters = 6;
  c.spec.final_time = 0.4;
  c.spec.time_step = 0.01;
  c.reduced_dim = 3;
  c.metric_stride = 5;
  return c;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vphr_test_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(Presets, DeskBoxes) {
  const RunConfig nlld = preset("nlld-desk");
  EXPECT_EQ(nlld.spec.kind, Benchmark::LandauDamping);
  EXPECT_DOUBLE_EQ(nlld.spec.wavenumber, 0.5);
  EXPECT_DOUBLE_EQ(nlld.spec.amplitude_lo, 0.46);
  EXPECT_DOUBLE_EQ(nlld.spec.amplitude_hi, 0.5);
  EXPECT_DOUBLE_EQ(nlld.spec.spread_lo, 0.96);
  EXPECT_DOUBLE_EQ(nlld.spec.spread_hi, 1.0);

  const RunConfig tsi = preset("tsi-desk");
  EXPECT_EQ(tsi.spec.kind, Benchmark::TwoStream);
  EXPECT_DOUBLE_EQ(tsi.spec.wavenumber, 0.2);
  EXPECT_DOUBLE_EQ(tsi.spec.amplitude_lo, 0.009);
  EXPECT_DOUBLE_EQ(tsi.spec.amplitude_hi, 0.011);
  EXPECT_DOUBLE_EQ(tsi.spec.spread_lo, 0.98);
  EXPECT_DOUBLE_EQ(tsi.spec.spread_hi, 1.02);
}

TEST(Presets, AllNamesValidate) {
  for (const auto& name : preset_names()) {
    RunConfig c = preset(name);
    EXPECT_NO_THROW(c.validate()) << name;
  }
  EXPECT_THROW(preset("nlld-huge"), ConfigError);
}

TEST(ConfigText, EmptyTextNamesTheRequiredKeys) {
  try {
    parse_config_text("");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("model"), std::string::npos) << msg;
    EXPECT_NE(msg.find("preset"), std::string::npos) << msg;
  }
}

TEST(ConfigText, UnknownKeyIsRejected) {
  EXPECT_THROW(parse_config_text("preset = nlld-desk\nmodel = rom\nparticels = 100\n"),
               ConfigError);
}

TEST(ConfigText, MalformedValuesAreRejected) {
  EXPECT_THROW(parse_config_text("preset = nlld-desk\nmodel = rom\nn = three\n"), ConfigError);
  EXPECT_THROW(parse_config_text("preset = nlld-desk\nmodel = rom\nn = 2.5\n"), ConfigError);
  EXPECT_THROW(parse_config_text("preset = nlld-desk\nmodel = warp\n"), ConfigError);
  EXPECT_THROW(parse_config_text("preset = nlld-desk\nmodel = rom\njust words\n"), ConfigError);
}

TEST(ConfigText, PresetIsAppliedBeforeOverrides) {
  // Override listed before the preset still wins.
  const RunConfig c = parse_config_text(
      "# desk run\n"
      "particles = 1234\n"
      "preset = tsi-desk\n"
      "model = hrom-ra   # adaptive\n"
      "gamma = 0\n");
  EXPECT_EQ(c.spec.particles, 1234);
  EXPECT_EQ(c.spec.kind, Benchmark::TwoStream);
  EXPECT_EQ(c.model, Model::HromAdaptive);
  EXPECT_EQ(c.gamma, 0);
}

TEST(ConfigText, DescribeRoundTrips) {
  RunConfig c = small_config(Model::Hrom);
  c.tol_eim = 3e-5;
  c.seed = 17;
  std::string text;
  for (const auto& [k, v] : describe(c)) {
    if (k == "output_dir" && v.empty()) continue;
    text += k + " = " + v + "\n";
  }
  const RunConfig back = parse_config_text(text);
  EXPECT_EQ(describe(back), describe(c));
}

TEST(ConfigValidate, ReducedDimensionLimits) {
  RunConfig c = small_config(Model::Rom);
  c.reduced_dim = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  c.reduced_dim = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(Model::HromAdaptive);
  c.gamma = 1;
  c.indicator_samples = 5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Metrics, IdenticalTrajectoriesHaveZeroError) {
  const Matrix X = Matrix::Random(50, 4);
  const Matrix V = Matrix::Random(50, 4);
  EXPECT_EQ(relative_error(X, V, X, V), 0.0);
  const Matrix Y = X * 1.01;
  EXPECT_GT(relative_error(X, V, Y, V), 0.0);
}

TEST(Metrics, AverageErrorOfLinearSeries) {
  // (1/T) integral of t over [0, 2] is 1.
  EXPECT_NEAR(average_error({0.0, 0.5, 1.0, 2.0}, {0.0, 0.5, 1.0, 2.0}), 1.0, 1e-15);
}

TEST(Metrics, EpsilonRankOfRankThree) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n01;
  Matrix A(40, 3), B(3, 12);
  for (Index i = 0; i < A.size(); ++i) A.data()[i] = n01(gen);
  for (Index i = 0; i < B.size(); ++i) B.data()[i] = n01(gen);
  const Matrix theta = A * B;
  const Matrix X = theta.topRows(20);
  const Matrix V = theta.bottomRows(20);
  EXPECT_EQ(epsilon_rank(X, V, 1e-8), 3);
  // With a loose threshold fewer modes suffice; never more than three.
  EXPECT_LE(epsilon_rank(X, V, 0.9), 3);
}

TEST(Metrics, ConservedTrajectoryHasZeroEnergyError) {
  const FemGrid grid(4.0 * M_PI, 16);
  const Matrix X = (Matrix::Random(100, 3).array() + 1.0) * M_PI;
  const Matrix V = Matrix::Random(100, 3);
  const Vector h0 = ensemble_hamiltonian(grid, X, V);
  EXPECT_EQ(hamiltonian_error(h0, h0), 0.0);
  std::vector<TrajectoryPoint> traj = {{0.0, X, V}, {0.1, X, V}};
  const MetricSeries s = compare_trajectories(grid, traj, traj);
  ASSERT_EQ(s.size(), 2u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s.solution_error[i], 0.0);
    EXPECT_EQ(s.hamiltonian_error[i], 0.0);
  }
}

TEST(Metrics, MisalignedTimeGridsThrow) {
  const FemGrid grid(4.0 * M_PI, 8);
  const Matrix X = Matrix::Constant(10, 2, 1.0);
  const Matrix V = Matrix::Zero(10, 2);
  std::vector<TrajectoryPoint> a = {{0.0, X, V}, {0.1, X, V}};
  std::vector<TrajectoryPoint> b = {{0.0, X, V}, {0.2, X, V}};
  std::vector<TrajectoryPoint> c = {{0.0, X, V}};
  EXPECT_THROW(compare_trajectories(grid, a, b), std::invalid_argument);
  EXPECT_THROW(compare_trajectories(grid, a, c), std::invalid_argument);
}

TEST(Run, IdenticalConfigGivesIdenticalMetricTables) {
  RunConfig c = small_config(Model::Hrom);
  c.output_dir = fresh_dir("repro_a").string();
  run(c);
  const std::string first = slurp(fs::path(c.output_dir) / "metrics.csv");
  c.output_dir = fresh_dir("repro_b").string();
  run(c);
  const std::string second = slurp(fs::path(c.output_dir) / "metrics.csv");
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, second);
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "metadata.json"));
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "timings.csv"));
}

TEST(Run, DifferentSeedChangesTheParameters) {
  RunConfig a = small_config(Model::Rom);
  RunConfig b = a;
  b.seed = a.seed + 1;
  const RunResult ra = run(a);
  const RunResult rb = run(b);
  EXPECT_NE(ra.series.to_csv(), rb.series.to_csv());
}

TEST(Run, ExactHyperReductionMatchesTheReducedModel) {
  RunConfig rom = small_config(Model::Rom);
  RunConfig hrom = small_config(Model::Hrom);
  hrom.identity_eim = true;
  hrom.avg_samples = hrom.spec.parameters;
  const RunResult a = run(rom);
  const RunResult b = run(hrom);
  ASSERT_EQ(a.series.size(), b.series.size());
  for (std::size_t i = 0; i < a.series.size(); ++i) {
    EXPECT_NEAR(a.series.solution_error[i], b.series.solution_error[i], 1e-10) << i;
  }
  EXPECT_LT((a.final_reduced.basis - b.final_reduced.basis).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((a.final_reduced.Y - b.final_reduced.Y).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((a.final_reduced.W - b.final_reduced.W).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Run, FullModelHasZeroErrorAgainstItself) {
  const RunResult r = run(small_config(Model::Fom));
  EXPECT_EQ(r.steps, 40);
  EXPECT_EQ(r.final_solution_error, 0.0);
}

TEST(Run, AdaptiveDimensionNeverDecreases) {
  RunConfig c = small_config(Model::HromAdaptive);
  c.reduced_dim = 1;
  c.c1 = 1.0;
  c.c2 = 1.0;
  const RunResult r = run(c);
  ASSERT_FALSE(r.series.dimension.empty());
  EXPECT_TRUE(std::is_sorted(r.series.dimension.begin(), r.series.dimension.end()));
  Index prev = 1;
  for (const auto& u : r.updates) {
    EXPECT_EQ(u.new_dim, prev + 1);
    prev = u.new_dim;
  }
  EXPECT_LE(r.series.dimension.back(), c.spec.parameters);
}

TEST(Scaling, SingleParameterCountGivesOneRow) {
  RunConfig c = small_config(Model::Hrom);
  const auto rows = scaling_probe(c, {6}, {Model::Hrom}, 3);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].parameters, 6);
  EXPECT_GT(rows[0].seconds_per_step, 0.0);
}

TEST(Scaling, ExponentOfExactPowerLaw) {
  std::vector<ScalingRow> rows;
  for (Index p : {10, 20, 40, 80}) {
    rows.push_back({Model::Fom, p, 3e-4 * std::pow(static_cast<double>(p), 1.25)});
  }
  EXPECT_NEAR(scaling_exponent(rows, Model::Fom), 1.25, 1e-12);
}

TEST(StateDump, RoundTrip) {
  const fs::path dir = fresh_dir("state");
  fs::create_directories(dir);
  const Matrix X = Matrix::Random(7, 3);
  const Matrix V = Matrix::Random(7, 3);
  write_state((dir / "s.bin").string(), 1.25, X, V);
  const TrajectoryPoint p = read_state((dir / "s.bin").string());
  EXPECT_EQ(p.time, 1.25);
  EXPECT_EQ(p.X, X);
  EXPECT_EQ(p.V, V);
}

TEST(StateDump, HistogramCountsEveryParticle) {
  const FemGrid grid(4.0 * M_PI, 8);
  const Vector x = (Vector::Random(300).array() + 1.0) * M_PI;
  const Vector v = Vector::Random(300) * 3.0;
  const std::string csv = phase_histogram_csv(grid, x, v);
  std::istringstream in(csv);
  std::string line, cell;
  long total = 0;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) total += std::stol(cell);
  }
  EXPECT_EQ(rows, 128);
  EXPECT_EQ(total, 300);
}

}  // namespace
}  // namespace vphr
