// SPDX-License-Identifier: Apache-2.0
#include "vphr/fom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace vphr {

namespace {

constexpr double kVelocityBound = 10.0;
constexpr double kBeamShift = 3.0;
constexpr int kMaxRootIterations = 100;
constexpr double kRootTolerance = 1e-12;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Solves cdf(x) = target on [lo, hi] for a monotone cdf.
template <typename Cdf, typename Pdf>
double invert_monotone(const Cdf& cdf, const Pdf& pdf, double target, double lo, double hi,
                       double guess) {
  if (target <= cdf(lo)) return lo;
  if (target >= cdf(hi)) return hi;
  double x = std::clamp(guess, lo, hi);
  for (int it = 0; it < kMaxRootIterations; ++it) {
    const double f = cdf(x) - target;
    if (f == 0.0) return x;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double slope = pdf(x);
    double next = slope > 0.0 ? x - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= kRootTolerance * (1.0 + std::abs(x)) || hi - lo <= kRootTolerance) {
      return next;
    }
    x = next;
  }
  throw NumericalError("inverse CDF root finder did not converge");
}

}  // namespace

std::string to_string(Benchmark kind) {
  return kind == Benchmark::LandauDamping ? "nlld" : "tsi";
}

Benchmark benchmark_from_string(const std::string& name) {
  if (name == "nlld") return Benchmark::LandauDamping;
  if (name == "tsi") return Benchmark::TwoStream;
  throw ConfigError("unknown benchmark '" + name + "' (expected nlld or tsi)");
}

double BenchmarkSpec::domain_length() const { return 2.0 * std::numbers::pi / wavenumber; }

Index BenchmarkSpec::steps() const {
  return static_cast<Index>(std::llround(final_time / time_step));
}

void BenchmarkSpec::validate() const {
  if (!(time_step > 0.0)) throw ConfigError("time step must be positive");
  if (final_time < 0.0) throw ConfigError("final time must be non-negative");
  if (!(wavenumber > 0.0)) throw ConfigError("wavenumber must be positive");
  if (!(amplitude_hi >= amplitude_lo) || !(spread_hi >= spread_lo) ||
      (amplitude_hi == amplitude_lo && spread_hi == spread_lo)) {
    throw ConfigError("parameter box is degenerate");
  }
  if (std::max(std::abs(amplitude_lo), std::abs(amplitude_hi)) >= 1.0) {
    throw ConfigError("perturbation amplitude must satisfy |a| < 1");
  }
  if (!(spread_lo > 0.0)) throw ConfigError("velocity spread must be positive");
  if (particles < 1 || parameters < 1) throw ConfigError("need N >= 1 and p >= 1");
  if (cells < 3) throw ConfigError("need at least 3 cells");
}

std::vector<Parameter> test_parameters(const BenchmarkSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(spec.amplitude_lo, spec.amplitude_hi);
  std::uniform_real_distribution<double> sd(spec.spread_lo, spec.spread_hi);
  std::vector<Parameter> out(static_cast<std::size_t>(spec.parameters));
  for (auto& p : out) {
    p.amplitude = amp(rng);
    p.spread = sd(rng);
  }
  return out;
}

double radical_inverse2(std::uint64_t i) {
  double result = 0.0;
  double f = 0.5;
  while (i > 0) {
    if (i & 1u) result += f;
    i >>= 1;
    f *= 0.5;
  }
  return result;
}

Eigen::MatrixX2d hammersley(Index count) {
  Eigen::MatrixX2d pts(count, 2);
  for (Index i = 1; i <= count; ++i) {
    pts(i - 1, 0) = (static_cast<double>(i) - 0.5) / static_cast<double>(count);
    pts(i - 1, 1) = radical_inverse2(static_cast<std::uint64_t>(i));
  }
  return pts;
}

double velocity_cdf(Benchmark kind, double spread, double v) {
  if (kind == Benchmark::LandauDamping) return normal_cdf(v / spread);
  return 0.5 * normal_cdf((v - kBeamShift) / spread) + 0.5 * normal_cdf((v + kBeamShift) / spread);
}

double velocity_pdf(Benchmark kind, double spread, double v) {
  if (kind == Benchmark::LandauDamping) return normal_pdf(v / spread) / spread;
  return 0.5 * (normal_pdf((v - kBeamShift) / spread) + normal_pdf((v + kBeamShift) / spread)) /
         spread;
}

std::pair<Vector, Vector> sample_initial(const BenchmarkSpec& spec, const Parameter& param) {
  if (std::abs(param.amplitude) >= 1.0) {
    throw std::invalid_argument("sample_initial: |amplitude| must be < 1");
  }
  const Index n = spec.particles;
  const double k = spec.wavenumber;
  const double length = spec.domain_length();
  const double a = param.amplitude;
  const auto pts = hammersley(n);

  const auto x_cdf = [&](double x) { return (x + a / k * std::sin(k * x)) / length; };
  const auto x_pdf = [&](double x) { return (1.0 + a * std::cos(k * x)) / length; };
  const auto v_cdf = [&](double v) { return velocity_cdf(spec.kind, param.spread, v); };
  const auto v_pdf = [&](double v) { return velocity_pdf(spec.kind, param.spread, v); };

  Vector x(n), v(n);
  for (Index i = 0; i < n; ++i) {
    const double u = pts(i, 0);
    const double w = pts(i, 1);
    x[i] = a == 0.0 ? length * u : invert_monotone(x_cdf, x_pdf, u, 0.0, length, length * u);
    v[i] = invert_monotone(v_cdf, v_pdf, w, -kVelocityBound, kVelocityBound, 0.0);
  }
  return {std::move(x), std::move(v)};
}

EnsembleState initial_ensemble(const BenchmarkSpec& spec, const std::vector<Parameter>& params) {
  EnsembleState state;
  const auto p = static_cast<Index>(params.size());
  state.X.resize(spec.particles, p);
  state.V.resize(spec.particles, p);
  state.params = params;
  for (Index s = 0; s < p; ++s) {
    auto [x, v] = sample_initial(spec, params[s]);
    state.X.col(s) = x;
    state.V.col(s) = v;
  }
  return state;
}

StormerVerlet::StormerVerlet(const FemGrid& grid, double time_step) : grid_(grid), dt_(time_step) {}

void StormerVerlet::prime(const EnsembleState& state) { field_ = ensemble_field(grid_, state.X); }

void StormerVerlet::step(EnsembleState& state) {
  if (field_.rows() != state.X.rows() || field_.cols() != state.X.cols()) prime(state);
  state.X += dt_ * (state.V - 0.5 * dt_ * field_);
  Matrix next = ensemble_field(grid_, state.X);
  state.V -= 0.5 * dt_ * (field_ + next);
  field_ = std::move(next);
  state.time += dt_;
}

void sv_step(const FemGrid& grid, double time_step, EnsembleState& state) {
  StormerVerlet integrator(grid, time_step);
  integrator.step(state);
}

EnsembleState run_fom(const FemGrid& grid, const BenchmarkSpec& spec, EnsembleState state,
                      Index stride, const SnapshotSink& sink) {
  StormerVerlet integrator(grid, spec.time_step);
  const Index steps = spec.steps();
  if (sink) sink(0, state);
  for (Index t = 1; t <= steps; ++t) {
    integrator.step(state);
    if (sink && (t == steps || (stride > 0 && t % stride == 0))) sink(t, state);
  }
  return state;
}

}  // namespace vphr
