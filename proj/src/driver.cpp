// SPDX-License-Identifier: Apache-2.0
#include "vphr/driver.hpp"

#include "vphr/fom.hpp"
#include "vphr/hyper.hpp"
#include "vphr/rank_adapt.hpp"

#include <spdlog/spdlog.h>

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>

#ifndef VPHR_REVISION
#define VPHR_REVISION "unknown"
#endif

namespace vphr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix gather_columns(const Matrix& A, const IndexList& cols) {
  Matrix out(A.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = A.col(cols[j]);
  return out;
}

std::string step_name(const char* prefix, Index step, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06lld.%s", prefix, static_cast<long long>(step), ext);
  return buf;
}

// Seed stream for the indicator samples, distinct from the parameter draw.
constexpr std::uint64_t kSampleSeedOffset = 0x5bd1e995ULL;

}  // namespace

std::string version_string() { return std::string("vphr 0.1.0+") + VPHR_REVISION; }

void write_state(const std::string& path, double time, const Matrix& X, const Matrix& V) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write state file '" + path + "'");
  const std::int64_t rows = X.rows();
  const std::int64_t cols = X.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(reinterpret_cast<const char*>(&time), sizeof time);
  out.write(reinterpret_cast<const char*>(X.data()),
            static_cast<std::streamsize>(sizeof(double) * X.size()));
  out.write(reinterpret_cast<const char*>(V.data()),
            static_cast<std::streamsize>(sizeof(double) * V.size()));
}

TrajectoryPoint read_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read state file '" + path + "'");
  std::int64_t rows = 0, cols = 0;
  TrajectoryPoint p;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  in.read(reinterpret_cast<char*>(&p.time), sizeof p.time);
  if (!in || rows < 0 || cols < 0) throw std::runtime_error("corrupt state file '" + path + "'");
  p.X.resize(rows, cols);
  p.V.resize(rows, cols);
  in.read(reinterpret_cast<char*>(p.X.data()),
          static_cast<std::streamsize>(sizeof(double) * p.X.size()));
  in.read(reinterpret_cast<char*>(p.V.data()),
          static_cast<std::streamsize>(sizeof(double) * p.V.size()));
  if (!in) throw std::runtime_error("truncated state file '" + path + "'");
  return p;
}

std::string phase_histogram_csv(const FemGrid& grid, Eigen::Ref<const Vector> x,
                                Eigen::Ref<const Vector> v) {
  constexpr int bins = 128;
  constexpr double vmax = 10.0;
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(bins, bins);
  for (Index l = 0; l < x.size(); ++l) {
    const int i = std::min(bins - 1, static_cast<int>(grid.wrap(x[l]) / grid.length() * bins));
    const double vn = (v[l] + vmax) / (2.0 * vmax);
    if (vn < 0.0 || vn >= 1.0) continue;
    const int j = std::min(bins - 1, static_cast<int>(vn * bins));
    ++counts(i, j);
  }
  std::string out;
  out.reserve(bins * bins * 3);
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      out += std::to_string(counts(i, j));
      out += j + 1 < bins ? ',' : '\n';
    }
  }
  return out;
}

RunResult run(const RunConfig& config, const StepObserver& observer) {
  config.validate();
  const BenchmarkSpec& spec = config.spec;
  const double dt = spec.time_step;
  const Index steps = spec.steps();
  const Model model = config.model;
  const bool reduced = model != Model::Fom;
  const bool hyper = model == Model::Hrom || model == Model::HromAdaptive;
  const bool adaptive = model == Model::HromAdaptive;
  const bool reference = !reduced || config.track_reference;
  const std::string& dir = config.output_dir;
  if (!dir.empty()) std::filesystem::create_directories(dir);

  const auto setup_start = Clock::now();
  const std::uint64_t eval_base = particle_evaluations();
  const FemGrid grid(spec.domain_length(), spec.cells);
  const auto params = test_parameters(spec, config.seed);
  EnsembleState fom = initial_ensemble(spec, params);
  StormerVerlet integrator(grid, dt);
  const PrkTableau tableau = PrkTableau::stormer_verlet_heun();

  RunResult res;
  ReducedState state;
  std::optional<HamiltonianDecomposition> dec;
  EimApprox eim;
  std::unique_ptr<AdaptivityState> adapt;
  const HyperOptions hyper_options{config.avg_samples};

  const auto rebuild_eim = [&]() {
    eim = config.identity_eim
              ? identity_eim(*dec)
              : build_eim(grid, *dec, state.basis, state.Y, state.W, config.tol_eim,
                          config.db_samples);
    res.max_eim_size = std::max(res.max_eim_size, eim.union_size());
    res.max_eim_fraction = std::max(
        res.max_eim_fraction,
        static_cast<double>(eim.union_size()) / static_cast<double>(spec.particles));
  };

  if (reduced) {
    state = cotangent_lift(fom.X, fom.V, config.reduced_dim);
    if (hyper) {
      dec.emplace(grid, spec.particles);
      rebuild_eim();
    }
    if (adaptive) {
      const IndexList samples = choose_indicator_samples(
          spec.parameters, config.indicator_samples, config.seed + kSampleSeedOffset);
      Matrix interp;
      if (config.gamma == 1) {
        interp = build_interpolation_operator(
            params, samples,
            InterpolationBasis(spec.amplitude_lo, spec.amplitude_hi, spec.spread_lo,
                               spec.spread_hi));
      }
      AdaptivityOptions opts;
      opts.c1 = config.c1;
      opts.c2 = config.c2;
      opts.gamma = config.gamma;
      adapt = std::make_unique<AdaptivityState>(grid, dt, samples, std::move(interp), opts);
      adapt->initialize(state, gather_columns(fom.X, samples), gather_columns(fom.V, samples));
    }
  }

  const auto model_x = [&]() { return reduced ? state.positions() : fom.X; };
  const auto model_v = [&]() { return reduced ? state.velocities() : fom.V; };
  const Vector h0_ref = ensemble_hamiltonian(grid, fom.X, fom.V);
  const Vector h0_model = reduced ? ensemble_hamiltonian(grid, model_x(), model_v()) : h0_ref;
  res.setup_seconds = seconds_since(setup_start);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  double latest_indicator = nan;
  double window_seconds = 0.0;
  Index window_steps = 0;

  const auto record = [&](double time) {
    MetricSeries& m = res.series;
    const Matrix X = model_x();
    const Matrix V = model_v();
    m.time.push_back(time);
    m.solution_error.push_back(reference && reduced ? relative_error(fom.X, fom.V, X, V)
                               : reduced            ? nan
                                                    : 0.0);
    m.hamiltonian_error.push_back(hamiltonian_error(ensemble_hamiltonian(grid, X, V), h0_model));
    m.electric_energy.push_back(mean_electric_energy(grid, X));
    if (reference && reduced) {
      m.reference_hamiltonian_error.push_back(
          hamiltonian_error(ensemble_hamiltonian(grid, fom.X, fom.V), h0_ref));
      m.reference_electric_energy.push_back(mean_electric_energy(grid, fom.X));
    } else if (!reduced) {
      m.reference_hamiltonian_error.push_back(m.hamiltonian_error.back());
      m.reference_electric_energy.push_back(m.electric_energy.back());
    } else {
      m.reference_hamiltonian_error.push_back(nan);
      m.reference_electric_energy.push_back(nan);
    }
    m.dimension.push_back(reduced ? state.dim() : spec.particles);
    m.eim_size.push_back(hyper ? eim.union_size() : 0);
    m.indicator.push_back(latest_indicator);
    m.step_seconds.push_back(window_steps > 0 ? window_seconds / window_steps : nan);
    window_seconds = 0.0;
    window_steps = 0;
  };

  const auto emit_snapshot = [&](Index step) {
    if (dir.empty()) return;
    if (config.histograms) {
      const Matrix X = model_x();
      const Matrix V = model_v();
      std::ofstream(std::filesystem::path(dir) / step_name("hist", step, "csv"))
          << phase_histogram_csv(grid, X.col(0), V.col(0));
    }
    if (config.dump_states) {
      write_state((std::filesystem::path(dir) / step_name("model", step, "bin")).string(),
                  step * dt, model_x(), model_v());
      if (reference && reduced) {
        write_state((std::filesystem::path(dir) / step_name("reference", step, "bin")).string(),
                    step * dt, fom.X, fom.V);
      }
    }
  };

  record(0.0);
  emit_snapshot(0);
  if (observer) observer(0, reduced ? &state : nullptr);

  for (Index step = 1; step <= steps; ++step) {
    const auto t0 = Clock::now();
    try {
      if (!reduced) {
        integrator.step(fom);
      } else {
        if (hyper) {
          prk_hr_step(grid, *dec, eim, state, tableau, dt, hyper_options);
        } else {
          prk2_step(grid, state, tableau, dt);
        }
        bool updated = false;
        if (adaptive) {
          latest_indicator = adapt->step(state);
          if (adapt->update_due(latest_indicator)) {
            const Matrix old_x = state.positions();
            const Matrix old_v = state.velocities();
            const auto upd = adapt->apply_update(state, latest_indicator);
            if (upd.applied) {
              updated = true;
              RankUpdateRecord r;
              r.step = step;
              r.time = step * dt;
              r.indicator = latest_indicator;
              r.new_dim = state.dim();
              r.reconstruction_change =
                  std::max((state.positions() - old_x).cwiseAbs().maxCoeff(),
                           (state.velocities() - old_v).cwiseAbs().maxCoeff());
              r.reconstruction_scale =
                  std::max(old_x.cwiseAbs().maxCoeff(), old_v.cwiseAbs().maxCoeff());
              res.updates.push_back(r);
              spdlog::info("rank update at t = {:.4f}: n = {}, indicator {:.3e}", r.time,
                           r.new_dim, r.indicator);
            }
          }
        }
        if (hyper && (step % config.eim_interval == 0 || (updated && config.eim_rebuild_on_update))) {
          rebuild_eim();
        }
      }
    } catch (const std::exception& e) {
      spdlog::error("step {} failed: {}", step, e.what());
      if (!dir.empty()) {
        write_state((std::filesystem::path(dir) / "last_valid_state.bin").string(),
                    (step - 1) * dt, model_x(), model_v());
      }
      throw;
    }
    const double elapsed = seconds_since(t0);
    res.total_seconds += elapsed;
    window_seconds += elapsed;
    ++window_steps;

    if (reduced && reference) integrator.step(fom);
    if (step % config.metric_stride == 0 || step == steps) record(step * dt);
    if (step % config.snapshot_stride == 0 || step == steps) emit_snapshot(step);
    if (observer) observer(step, reduced ? &state : nullptr);
  }

  res.steps = steps;
  res.particle_evaluations = particle_evaluations() - eval_base;
  res.final_solution_error = res.series.solution_error.back();
  if (reduced) res.final_reduced = state;
  if (!dir.empty()) write_outputs(res, config, dir);
  return res;
}

void write_outputs(const RunResult& result, const RunConfig& config, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["version"] = version_string();
  meta["config"] = describe(config);
  meta["indicator_jacobian_basis"] = "post-update";
  meta["steps"] = result.steps;
  meta["setup_seconds"] = result.setup_seconds;
  meta["model_seconds"] = result.total_seconds;
  meta["max_eim_size"] = result.max_eim_size;
  meta["max_eim_fraction"] = result.max_eim_fraction;
  meta["particle_evaluations"] = result.particle_evaluations;
  meta["final_solution_error"] = result.final_solution_error;
  meta["average_solution_error"] = result.series.average_solution_error();
  meta["rank_updates"] = result.updates.size();
  std::ofstream(std::filesystem::path(dir) / "metadata.json") << meta.dump(2) << '\n';
  std::ofstream(std::filesystem::path(dir) / "metrics.csv") << result.series.to_csv();
  std::ofstream(std::filesystem::path(dir) / "timings.csv") << result.series.timing_csv();
  std::ofstream upd(std::filesystem::path(dir) / "updates.csv");
  upd.precision(10);
  upd << "time,step,indicator,dimension,reconstruction_change\n";
  for (const auto& r : result.updates) {
    upd << r.time << ',' << r.step << ',' << r.indicator << ',' << r.new_dim << ','
        << r.reconstruction_change << '\n';
  }
}

std::vector<ScalingRow> scaling_probe(const RunConfig& base, const std::vector<Index>& p_list,
                                      const std::vector<Model>& models, Index steps) {
  if (!std::is_sorted(p_list.begin(), p_list.end())) {
    throw std::invalid_argument("scaling_probe: p-list must be ascending");
  }
  std::vector<ScalingRow> rows;
  for (Index p : p_list) {
    for (Model m : models) {
      RunConfig c = base;
      c.model = m;
      c.spec.parameters = p;
      c.spec.final_time = static_cast<double>(steps) * c.spec.time_step;
      c.track_reference = false;
      c.output_dir.clear();
      c.histograms = false;
      c.dump_states = false;
      c.metric_stride = steps;
      c.snapshot_stride = steps;
      const RunResult r = run(c);
      rows.push_back({m, p, r.total_seconds / static_cast<double>(steps)});
      spdlog::info("scaling: model {} p = {}: {:.4e} s/step", to_string(m), p,
                   rows.back().seconds_per_step);
    }
  }
  return rows;
}

double scaling_exponent(const std::vector<ScalingRow>& rows, Model model) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.model != model) continue;
    const double x = std::log(static_cast<double>(r.parameters));
    const double y = std::log(r.seconds_per_step);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace vphr
