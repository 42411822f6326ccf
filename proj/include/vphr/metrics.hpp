// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vphr/fem_poisson.hpp"
#include "vphr/types.hpp"

#include <string>
#include <vector>

namespace vphr {

/// ||Theta_ref - Theta||_F / ||Theta_ref||_F over stacked (X; V).
double relative_error(const Matrix& ref_x, const Matrix& ref_v, const Matrix& x, const Matrix& v);

/// (1/T) integral of the error series, trapezoidal on the given times.
double average_error(const std::vector<double>& times, const std::vector<double>& errors);

/// H per parameter column.
Vector ensemble_hamiltonian(const FemGrid& grid, const Matrix& X, const Matrix& V);

/// Mean over columns of |H - H0| / |H0|.
double hamiltonian_error(const Vector& current, const Vector& initial);

/// Mean of h over parameter columns.
double mean_electric_energy(const FemGrid& grid, const Matrix& X);

/// Smallest r with ||Theta - Theta_r||_F / ||Theta||_F < eps.
Index epsilon_rank(const Matrix& X, const Matrix& V, double eps);

/// One row per stored time.
struct MetricSeries {
  std::vector<double> time;
  std::vector<double> solution_error;
  std::vector<double> hamiltonian_error;
  std::vector<double> reference_hamiltonian_error;
  std::vector<double> electric_energy;
  std::vector<double> reference_electric_energy;
  std::vector<Index> dimension;
  std::vector<Index> eim_size;
  std::vector<double> indicator;
  std::vector<double> step_seconds;

  std::size_t size() const { return time.size(); }
  double average_solution_error() const { return average_error(time, solution_error); }
  double max_hamiltonian_error() const;
  double max_reference_hamiltonian_error() const;
  /// Comma-separated table with a header row; `time` first. Wall-clock
  /// columns are kept out so equal runs give equal tables.
  std::string to_csv() const;
  /// time, step_seconds.
  std::string timing_csv() const;
};

struct TrajectoryPoint {
  double time = 0.0;
  Matrix X;
  Matrix V;
};

/// Error and energy metrics of `model` against `reference`. Throws
/// std::invalid_argument if the time grids differ.
MetricSeries compare_trajectories(const FemGrid& grid, const std::vector<TrajectoryPoint>& reference,
                                  const std::vector<TrajectoryPoint>& model);

}  // namespace vphr
