// SPDX-License-Identifier: Apache-2.0
//
// Particle-in-cell full-order model: quasirandom initialization of the
// parametric initial distribution and the Stormer-Verlet time loop.
#pragma once

#include "vphr/fem_poisson.hpp"
#include "vphr/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace vphr {

enum class Benchmark { LandauDamping, TwoStream };

std::string to_string(Benchmark kind);
Benchmark benchmark_from_string(const std::string& name);

struct BenchmarkSpec {
  Benchmark kind = Benchmark::LandauDamping;
  double wavenumber = 0.5;
  double amplitude_lo = 0.46, amplitude_hi = 0.5;
  double spread_lo = 0.96, spread_hi = 1.0;
  Index particles = 20000;
  Index cells = 32;
  Index parameters = 20;
  double final_time = 20.0;
  double time_step = 0.01;

  double domain_length() const;
  Index steps() const;
  /// Throws ConfigError on Delta t <= 0, T < 0 or a degenerate box.
  void validate() const;
};

/// The p test parameters: uniform random draws in the box from `seed`.
std::vector<Parameter> test_parameters(const BenchmarkSpec& spec, std::uint64_t seed);

/// Base-2 radical inverse of i (van der Corput).
double radical_inverse2(std::uint64_t i);

/// Hammersley point set in [0,1)^2: row i-1 is ((i - 0.5)/N, phi_2(i)).
Eigen::MatrixX2d hammersley(Index count);

/// Cumulative distribution of the velocity marginal.
double velocity_cdf(Benchmark kind, double spread, double v);
double velocity_pdf(Benchmark kind, double spread, double v);

/// Inverse-CDF sampling of the initial distribution at the Hammersley set.
/// Positions invert (x + (a/k) sin(kx)) / length; velocities invert the
/// Maxwellian (or the +-3 two-beam mixture), both on a bracket with Newton
/// steps safeguarded by bisection.
std::pair<Vector, Vector> sample_initial(const BenchmarkSpec& spec, const Parameter& param);

struct EnsembleState {
  Matrix X;  // N x p positions (unwrapped)
  Matrix V;  // N x p velocities
  std::vector<Parameter> params;
  double time = 0.0;
};

EnsembleState initial_ensemble(const BenchmarkSpec& spec, const std::vector<Parameter>& params);

/// Explicit Stormer-Verlet for the ensemble, caching E(X) between steps.
class StormerVerlet {
 public:
  StormerVerlet(const FemGrid& grid, double time_step);

  /// Advances `state` by one step. The cached field is (re)computed if it
  /// does not match the state's shape.
  void step(EnsembleState& state);

  /// Field at the current state (valid after the first step or prime()).
  const Matrix& field() const { return field_; }
  void prime(const EnsembleState& state);
  void invalidate() { field_.resize(0, 0); }

  double time_step() const { return dt_; }

 private:
  const FemGrid& grid_;
  double dt_;
  Matrix field_;
};

/// One Stormer-Verlet step without cache, for tests.
void sv_step(const FemGrid& grid, double time_step, EnsembleState& state);

using SnapshotSink = std::function<void(Index step, const EnsembleState&)>;

/// Runs spec.steps() steps; the sink sees step 0 and every `stride`-th step
/// (and the final one).
EnsembleState run_fom(const FemGrid& grid, const BenchmarkSpec& spec, EnsembleState state,
                      Index stride, const SnapshotSink& sink = {});

}  // namespace vphr
