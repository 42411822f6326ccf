// SPDX-License-Identifier: Apache-2.0
#include "vphr/fem_poisson.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace vphr {

namespace {

std::uint64_t g_particle_evaluations = 0;

struct Located {
  Index element;
  double theta;
};

std::vector<Located> locate_all(const FemGrid& grid, Eigen::Ref<const Vector> x) {
  std::vector<Located> out(static_cast<std::size_t>(x.size()));
  for (Index l = 0; l < x.size(); ++l) {
    grid.locate(x[l], out[l].element, out[l].theta);
  }
  count_particle_evaluations(static_cast<std::uint64_t>(x.size()));
  return out;
}

// Interior right-hand side from per-node accumulations (drops the pinned node).
Vector interior(const Vector& full) { return full.tail(full.size() - 1); }

}  // namespace

FemGrid::FemGrid(double length, Index cells)
    : length_(length), cells_(cells), dx_(length / static_cast<double>(cells)) {
  if (cells < 3) {
    throw std::invalid_argument("FemGrid: need at least 3 cells");
  }
  if (!(length > 0.0)) {
    throw std::invalid_argument("FemGrid: length must be positive");
  }
  const Index kappa = dim();
  const double nx = static_cast<double>(cells_);

  // Closed-form eigenpairs of (1/dx) tridiag(-1, 2, -1) with the alternating
  // sign convention: delta_k = 2/dx (1 + cos(k pi / n_x)).
  eigvals_.resize(kappa);
  eigvecs_.resize(kappa, kappa);
  const double scale = std::sqrt(2.0 / nx);
  for (Index k = 1; k <= kappa; ++k) {
    eigvals_[k - 1] = 2.0 / dx_ * (1.0 + std::cos(k * std::numbers::pi / nx));
    for (Index j = 1; j <= kappa; ++j) {
      const double sign = (j % 2 == 0) ? 1.0 : -1.0;
      eigvecs_(j - 1, k - 1) = sign * scale * std::sin(j * k * std::numbers::pi / nx);
    }
  }
  load_ = Vector::Constant(kappa, dx_);

  const double diag = 2.0 / dx_;
  const double off = -1.0 / dx_;
  thomas_upper_.resize(kappa);
  thomas_pivot_.resize(kappa);
  thomas_pivot_[0] = diag;
  thomas_upper_[0] = off / diag;
  for (Index i = 1; i < kappa; ++i) {
    thomas_pivot_[i] = diag - off * thomas_upper_[i - 1];
    thomas_upper_[i] = off / thomas_pivot_[i];
  }
}

double FemGrid::wrap(double x) const {
  double w = x - length_ * std::floor(x / length_);
  if (w >= length_) w -= length_;
  if (w < 0.0) w = 0.0;
  return w;
}

void FemGrid::locate(double x, Index& element, double& theta) const {
  const double s = wrap(x) / dx_;
  double e = std::floor(s);
  theta = s - e;
  if (theta == 0.0) {
    e -= 1.0;
    theta = 1.0;
  }
  element = static_cast<Index>(e);
  if (element < 0) element += cells_;
  if (element >= cells_) element -= cells_;
}

ShapeSample FemGrid::shape(double x) const {
  Index e;
  double theta;
  locate(x, e, theta);
  ShapeSample s;
  s.node = {e, (e + 1) % cells_};
  s.value = {1.0 - theta, theta};
  s.slope = {-1.0 / dx_, 1.0 / dx_};
  return s;
}

void FemGrid::solve_in_place(Eigen::Ref<Vector> rhs) const {
  const Index kappa = dim();
  const double off = -1.0 / dx_;
  rhs[0] /= thomas_pivot_[0];
  for (Index i = 1; i < kappa; ++i) {
    rhs[i] = (rhs[i] - off * rhs[i - 1]) / thomas_pivot_[i];
  }
  for (Index i = kappa - 2; i >= 0; --i) {
    rhs[i] -= thomas_upper_[i] * rhs[i + 1];
  }
}

Vector FemGrid::solve(const Vector& rhs) const {
  Vector out = rhs;
  solve_in_place(out);
  return out;
}

Matrix FemGrid::stiffness() const {
  const Index kappa = dim();
  Matrix t = Matrix::Zero(kappa, kappa);
  for (Index i = 0; i < kappa; ++i) {
    t(i, i) = 2.0 / dx_;
    if (i > 0) t(i, i - 1) = -1.0 / dx_;
    if (i + 1 < kappa) t(i, i + 1) = -1.0 / dx_;
  }
  return t;
}

Vector periodic_deposit(const FemGrid& grid, Eigen::Ref<const Vector> positions) {
  Vector full = Vector::Zero(grid.cells());
  for (const auto& [e, theta] : locate_all(grid, positions)) {
    full[e] += 1.0 - theta;
    full[(e + 1) % grid.cells()] += theta;
  }
  return full;
}

Vector charge_density(const FemGrid& grid, Eigen::Ref<const Vector> positions) {
  const double weight = grid.length() / static_cast<double>(positions.size());
  return grid.load() - weight * interior(periodic_deposit(grid, positions));
}

Vector solve_poisson(const FemGrid& grid, const Vector& density) { return grid.solve(density); }

FieldSolve solve_field(const FemGrid& grid, Eigen::Ref<const Vector> positions) {
  FieldSolve f;
  f.density = charge_density(grid, positions);
  f.potential = grid.solve(f.density);
  return f;
}

void field_gradient(const FemGrid& grid, Eigen::Ref<const Vector> positions,
                    Eigen::Ref<Vector> out) {
  const Index nx = grid.cells();
  const auto located = locate_all(grid, positions);

  Vector full = Vector::Zero(nx);
  for (const auto& [e, theta] : located) {
    full[e] += 1.0 - theta;
    full[(e + 1) % nx] += theta;
  }
  const double weight = grid.length() / static_cast<double>(positions.size());
  Vector phi = grid.load() - weight * interior(full);
  grid.solve_in_place(phi);

  const double inv_dx = 1.0 / grid.dx();
  for (Index l = 0; l < positions.size(); ++l) {
    const Index e = located[l].element;
    const double left = FemGrid::nodal(phi, e);
    const double right = FemGrid::nodal(phi, (e + 1) % nx);
    out[l] = -(right - left) * inv_dx;
  }
}

Vector field_gradient(const FemGrid& grid, Eigen::Ref<const Vector> positions) {
  Vector out(positions.size());
  field_gradient(grid, positions, out);
  return out;
}

Matrix ensemble_field(const FemGrid& grid, const Matrix& positions) {
  Matrix out(positions.rows(), positions.cols());
  for (Index s = 0; s < positions.cols(); ++s) {
    field_gradient(grid, positions.col(s), out.col(s));
  }
  return out;
}

double potential_energy(const FemGrid& grid, Eigen::Ref<const Vector> positions) {
  const FieldSolve f = solve_field(grid, positions);
  return static_cast<double>(positions.size()) / (2.0 * grid.length()) *
         f.density.dot(f.potential);
}

double hamiltonian(const FemGrid& grid, Eigen::Ref<const Vector> positions,
                   Eigen::Ref<const Vector> velocities) {
  return 0.5 * velocities.squaredNorm() + potential_energy(grid, positions);
}

Vector field_jacobian_apply(const FemGrid& grid, Eigen::Ref<const Vector> positions,
                            Eigen::Ref<const Vector> direction) {
  const Index nx = grid.cells();
  const double inv_dx = 1.0 / grid.dx();
  const auto located = locate_all(grid, positions);

  Vector full = Vector::Zero(nx);
  for (Index l = 0; l < positions.size(); ++l) {
    const Index e = located[l].element;
    full[e] -= direction[l] * inv_dx;
    full[(e + 1) % nx] += direction[l] * inv_dx;
  }
  Vector psi = interior(full);
  grid.solve_in_place(psi);

  const double weight = grid.length() / static_cast<double>(positions.size());
  Vector out(positions.size());
  for (Index l = 0; l < positions.size(); ++l) {
    const Index e = located[l].element;
    out[l] = weight * (FemGrid::nodal(psi, (e + 1) % nx) - FemGrid::nodal(psi, e)) * inv_dx;
  }
  return out;
}

std::uint64_t particle_evaluations() { return g_particle_evaluations; }
void reset_particle_evaluations() { g_particle_evaluations = 0; }
void count_particle_evaluations(std::uint64_t count) { g_particle_evaluations += count; }

}  // namespace vphr
