// SPDX-License-Identifier: Apache-2.0
//
// End-to-end runs of the full, reduced and hyper-reduced models, metric
// collection and file output.
#pragma once

#include "vphr/config.hpp"
#include "vphr/metrics.hpp"
#include "vphr/rom_dlr.hpp"

#include <functional>
#include <string>
#include <vector>

namespace vphr {

struct RankUpdateRecord {
  Index step = 0;
  double time = 0.0;
  double indicator = 0.0;
  Index new_dim = 0;
  // max |Psi_new Y_new - Psi_old Y_old| (and the same for W) at the update
  double reconstruction_change = 0.0;
  double reconstruction_scale = 0.0;
};

struct RunResult {
  MetricSeries series;
  std::vector<RankUpdateRecord> updates;
  Index steps = 0;
  double total_seconds = 0.0;   // model steps only
  double setup_seconds = 0.0;
  Index max_eim_size = 0;
  double max_eim_fraction = 0.0;
  std::uint64_t particle_evaluations = 0;
  double final_solution_error = 0.0;
  ReducedState final_reduced;  // empty for the full model
};

/// Optional per-step observer: (step, reduced state or nullptr).
using StepObserver = std::function<void(Index, const ReducedState*)>;

/// Runs the configured model. Writes outputs when config.output_dir is set.
RunResult run(const RunConfig& config, const StepObserver& observer = {});

/// metadata.json, metrics.csv, timings.csv and updates.csv in `dir`.
void write_outputs(const RunResult& result, const RunConfig& config, const std::string& dir);

/// Binary dump of one (X, V) state: rows, cols, time, X, V.
void write_state(const std::string& path, double time, const Matrix& X, const Matrix& V);
TrajectoryPoint read_state(const std::string& path);

/// 128 x 128 (x, v) counts over [0, length) x [-10, 10] as CSV rows.
std::string phase_histogram_csv(const FemGrid& grid, Eigen::Ref<const Vector> x,
                                Eigen::Ref<const Vector> v);

struct ScalingRow {
  Model model;
  Index parameters = 0;
  double seconds_per_step = 0.0;
};

/// Mean wall time per step over `steps` steps for each (model, p).
std::vector<ScalingRow> scaling_probe(const RunConfig& base, const std::vector<Index>& p_list,
                                      const std::vector<Model>& models, Index steps = 100);

/// Least-squares slope of log(time) against log(p).
double scaling_exponent(const std::vector<ScalingRow>& rows, Model model);

std::string version_string();

}  // namespace vphr
