// SPDX-License-Identifier: Apache-2.0
#include "vphr/metrics.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace vphr {

double relative_error(const Matrix& ref_x, const Matrix& ref_v, const Matrix& x, const Matrix& v) {
  const double num = std::sqrt((ref_x - x).squaredNorm() + (ref_v - v).squaredNorm());
  const double den = std::sqrt(ref_x.squaredNorm() + ref_v.squaredNorm());
  return den > 0.0 ? num / den : num;
}

double average_error(const std::vector<double>& times, const std::vector<double>& errors) {
  if (times.size() != errors.size()) throw std::invalid_argument("average_error: size mismatch");
  if (times.size() < 2) return errors.empty() ? 0.0 : errors.front();
  double integral = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    integral += 0.5 * (times[i] - times[i - 1]) * (errors[i] + errors[i - 1]);
  }
  const double span = times.back() - times.front();
  return span > 0.0 ? integral / span : errors.front();
}

Vector ensemble_hamiltonian(const FemGrid& grid, const Matrix& X, const Matrix& V) {
  Vector h(X.cols());
  for (Index s = 0; s < X.cols(); ++s) h[s] = hamiltonian(grid, X.col(s), V.col(s));
  return h;
}

double hamiltonian_error(const Vector& current, const Vector& initial) {
  if (current.size() != initial.size() || current.size() == 0) {
    throw std::invalid_argument("hamiltonian_error: size mismatch");
  }
  double sum = 0.0;
  for (Index s = 0; s < current.size(); ++s) {
    sum += std::abs(current[s] - initial[s]) / std::abs(initial[s]);
  }
  return sum / static_cast<double>(current.size());
}

double mean_electric_energy(const FemGrid& grid, const Matrix& X) {
  double sum = 0.0;
  for (Index s = 0; s < X.cols(); ++s) sum += potential_energy(grid, X.col(s));
  return sum / static_cast<double>(X.cols());
}

Index epsilon_rank(const Matrix& X, const Matrix& V, double eps) {
  Matrix theta(X.rows() + V.rows(), X.cols());
  theta << X, V;
  Eigen::BDCSVD<Matrix> svd(theta);
  const Vector& s = svd.singularValues();
  const double total = s.squaredNorm();
  if (total == 0.0) return 0;
  // tail[r] = sum_{i >= r} s_i^2, summed from the small end; subtracting
  // from the total cancels at the roundoff level.
  Vector tail = Vector::Zero(s.size() + 1);
  for (Index r = s.size() - 1; r >= 0; --r) tail[r] = tail[r + 1] + s[r] * s[r];
  for (Index r = 0; r < s.size(); ++r) {
    if (std::sqrt(tail[r] / total) < eps) return r;
  }
  return s.size();
}

namespace {

double max_finite(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) m = std::max(m, x);
  }
  return m;
}

}  // namespace

double MetricSeries::max_hamiltonian_error() const { return max_finite(hamiltonian_error); }

double MetricSeries::max_reference_hamiltonian_error() const {
  return max_finite(reference_hamiltonian_error);
}

std::string MetricSeries::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "time,solution_error,hamiltonian_error,reference_hamiltonian_error,electric_energy,"
         "reference_electric_energy,dimension,eim_size,indicator\n";
  const auto at = [](const std::vector<double>& v, std::size_t i) {
    return i < v.size() ? v[i] : std::numeric_limits<double>::quiet_NaN();
  };
  for (std::size_t i = 0; i < time.size(); ++i) {
    out << time[i] << ',' << at(solution_error, i) << ',' << at(hamiltonian_error, i) << ','
        << at(reference_hamiltonian_error, i) << ',' << at(electric_energy, i) << ','
        << at(reference_electric_energy, i) << ',' << (i < dimension.size() ? dimension[i] : 0)
        << ',' << (i < eim_size.size() ? eim_size[i] : 0) << ',' << at(indicator, i) << '\n';
  }
  return out.str();
}

std::string MetricSeries::timing_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "time,step_seconds\n";
  for (std::size_t i = 0; i < time.size(); ++i) {
    out << time[i] << ',' << (i < step_seconds.size() ? step_seconds[i] : 0.0) << '\n';
  }
  return out.str();
}

MetricSeries compare_trajectories(const FemGrid& grid, const std::vector<TrajectoryPoint>& reference,
                                  const std::vector<TrajectoryPoint>& model) {
  if (reference.size() != model.size()) {
    throw std::invalid_argument("compare_trajectories: different number of stored times");
  }
  MetricSeries m;
  if (model.empty()) return m;
  const Vector h0_ref = ensemble_hamiltonian(grid, reference.front().X, reference.front().V);
  const Vector h0 = ensemble_hamiltonian(grid, model.front().X, model.front().V);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& r = reference[i];
    const auto& s = model[i];
    if (std::abs(r.time - s.time) > 1e-9 * std::max(1.0, std::abs(r.time))) {
      throw std::invalid_argument("compare_trajectories: time grids are not aligned");
    }
    m.time.push_back(s.time);
    m.solution_error.push_back(relative_error(r.X, r.V, s.X, s.V));
    m.hamiltonian_error.push_back(
        hamiltonian_error(ensemble_hamiltonian(grid, s.X, s.V), h0));
    m.reference_hamiltonian_error.push_back(
        hamiltonian_error(ensemble_hamiltonian(grid, r.X, r.V), h0_ref));
    m.electric_energy.push_back(mean_electric_energy(grid, s.X));
    m.reference_electric_energy.push_back(mean_electric_energy(grid, r.X));
    m.dimension.push_back(0);
    m.eim_size.push_back(0);
    m.indicator.push_back(nan);
    m.step_seconds.push_back(nan);
  }
  return m;
}

}  // namespace vphr
