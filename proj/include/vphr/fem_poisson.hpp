// SPDX-License-Identifier: Apache-2.0
//
// Periodic piecewise-linear finite elements for the 1D Poisson problem and
// the particle-to-grid machinery built on top of it.
//
// Nodes are x_i = i*dx, i = 0..n_x-1, with x_0 identified with x_{n_x}. The
// hat function of node 0 is pinned (its coefficient is fixed to zero), so
// the unknowns live in R^kappa with kappa = n_x - 1 and interior index
// j = 0..kappa-1 corresponds to node j+1.
#pragma once

#include "vphr/types.hpp"

#include <array>
#include <cstdint>

namespace vphr {

/// Nonzero hat functions at one position: the two nodes of the containing
/// element, their values and their derivatives.
struct ShapeSample {
  std::array<Index, 2> node{};
  std::array<double, 2> value{};
  std::array<double, 2> slope{};
};

class FemGrid {
 public:
  /// Throws std::invalid_argument if cells < 3 or length <= 0.
  FemGrid(double length, Index cells);

  double length() const { return length_; }
  Index cells() const { return cells_; }
  double dx() const { return dx_; }
  /// Number of unknowns kappa = cells - 1.
  Index dim() const { return cells_ - 1; }

  /// Stiffness eigenvalues delta_k, all strictly positive.
  const Vector& eigenvalues() const { return eigvals_; }
  /// Orthogonal eigenvector matrix, column k pairs with eigenvalues()[k].
  const Matrix& eigenvectors() const { return eigvecs_; }
  /// s_j = integral of the j-th hat function (= dx).
  const Vector& load() const { return load_; }

  double wrap(double x) const;

  /// Element containing x (after wrapping) and the local coordinate
  /// theta in (0, 1]. A position exactly on a node belongs to the element
  /// on its left.
  void locate(double x, Index& element, double& theta) const;

  ShapeSample shape(double x) const;

  /// T^{-1} g with the precomputed Thomas factorization; O(kappa).
  Vector solve(const Vector& rhs) const;
  void solve_in_place(Eigen::Ref<Vector> rhs) const;

  /// Dense (1/dx) tridiag(-1, 2, -1), for diagnostics and tests.
  Matrix stiffness() const;

  /// Value of an interior coefficient vector at periodic node `node`;
  /// the pinned node returns zero.
  static double nodal(const Vector& coeffs, Index node) {
    return node == 0 ? 0.0 : coeffs[node - 1];
  }

 private:
  double length_;
  Index cells_;
  double dx_;
  Vector eigvals_;
  Matrix eigvecs_;
  Vector load_;
  // Thomas factorization of T: modified super-diagonal and pivots.
  Vector thomas_upper_;
  Vector thomas_pivot_;
};

/// Density and potential of one particle configuration.
struct FieldSolve {
  Vector density;    // g(x) in R^kappa
  Vector potential;  // Phi = T^{-1} g
};

/// Sum over particles of every (unpinned) hat function, length n_x.
Vector periodic_deposit(const FemGrid& grid, Eigen::Ref<const Vector> positions);

/// g_j = s_j - (length/N) sum_l lambda_j(x_l).
Vector charge_density(const FemGrid& grid, Eigen::Ref<const Vector> positions);

Vector solve_poisson(const FemGrid& grid, const Vector& density);

FieldSolve solve_field(const FemGrid& grid, Eigen::Ref<const Vector> positions);

/// grad_x h(x) = -grad Lambda(x) T^{-1} g(x), the discrete electric field.
Vector field_gradient(const FemGrid& grid, Eigen::Ref<const Vector> positions);
void field_gradient(const FemGrid& grid, Eigen::Ref<const Vector> positions,
                    Eigen::Ref<Vector> out);
/// Column-wise field of an N x p ensemble.
Matrix ensemble_field(const FemGrid& grid, const Matrix& positions);

/// h(x) = N/(2 length) g^T T^{-1} g >= 0.
double potential_energy(const FemGrid& grid, Eigen::Ref<const Vector> positions);

/// H(x, v) = v^T v / 2 + h(x).
double hamiltonian(const FemGrid& grid, Eigen::Ref<const Vector> positions,
                   Eigen::Ref<const Vector> velocities);

/// J_E(x) w for the Hessian of h, in O(N + kappa). Second derivatives of the
/// hats vanish inside elements, so only the grad Lambda T^{-1} grad Lambda^T
/// term contributes.
Vector field_jacobian_apply(const FemGrid& grid, Eigen::Ref<const Vector> positions,
                            Eigen::Ref<const Vector> direction);

/// Running count of particle-to-grid evaluations (one per particle position
/// mapped to its element). Single-threaded instrumentation.
std::uint64_t particle_evaluations();
void reset_particle_evaluations();
void count_particle_evaluations(std::uint64_t count);

}  // namespace vphr
