// SPDX-License-Identifier: Apache-2.0
//
// Dynamical low-rank reduced model: the basis Psi evolves on the Stiefel
// manifold together with the coefficient matrices Y and W.
#pragma once

#include "vphr/fem_poisson.hpp"
#include "vphr/types.hpp"

#include <array>

namespace vphr {

struct ReducedState {
  Matrix basis;  // Psi, N x n
  Matrix Y;      // n x p
  Matrix W;      // n x p
  double time = 0.0;

  Index dim() const { return basis.cols(); }
  Index particles() const { return basis.rows(); }
  Index parameters() const { return Y.cols(); }
  Matrix positions() const { return basis * Y; }
  Matrix velocities() const { return basis * W; }
  /// max |Psi^T Psi - I|.
  double orthonormality_defect() const;
};

/// M = Y Y^T + W W^T with an eigenvalue-truncated pseudo-inverse.
class GramOperator {
 public:
  static constexpr double kRelativeThreshold = 1e-8;

  GramOperator(const Matrix& Y, const Matrix& W);

  const Matrix& matrix() const { return gram_; }
  /// B M^+ for B with n columns.
  Matrix solve_right(const Matrix& B) const;
  bool truncated() const { return truncated_; }

 private:
  Matrix gram_;
  Matrix pinv_;
  bool truncated_ = false;
};

/// Two-stage partitioned Runge-Kutta coefficients for (Y, W, Upsilon).
struct PrkTableau {
  std::array<Eigen::Matrix2d, 3> a;
  std::array<Eigen::Vector2d, 3> b;

  /// Stormer-Verlet on (Y, W) and Heun on the tangent variable.
  static PrkTableau stormer_verlet_heun();

  /// Throws std::invalid_argument unless the stages can be evaluated
  /// explicitly in the order used by prk_step.
  void validate() const;
  /// Largest violation of the first and second order conditions, including
  /// the coupling conditions between components.
  double order_defect() const;
};

/// Psi from the leading n left singular vectors of [X0 V0]; Y, W are the
/// projections. Throws std::invalid_argument if n exceeds the numerical rank.
ReducedState cotangent_lift(const Matrix& X0, const Matrix& V0, Index n);

/// Cayley retraction at a base point Psi0, evaluated for one tangent
/// variable Upsilon with the rank-2n factorization A = F G^T.
class CayleyRetraction {
 public:
  /// Throws StepSizeError if I - A/2 is numerically singular.
  CayleyRetraction(const Matrix& base, const Matrix& tangent);

  const Matrix& base() const { return base_; }
  const Matrix& tangent() const { return tangent_; }
  /// R(Upsilon) = cay(A) Psi0.
  const Matrix& point() const { return point_; }

  /// dR[Upsilon](Delta).
  Matrix differential(const Matrix& delta) const;
  /// Delta with dR[Upsilon](Delta) = L, for L tangent at R(Upsilon).
  Matrix inverse_differential(const Matrix& L) const;

 private:
  // (I - A/2)^{-1} B
  Matrix solve_factor(const Matrix& B) const;
  // A(Delta) W0 for the skew generator of a direction Delta.
  Matrix generator_times_w0(const Matrix& delta) const;

  Matrix base_;
  Matrix tangent_;
  Matrix F_, G_;
  Eigen::PartialPivLU<Matrix> block_;
  Matrix w0_;  // (I - A/2)^{-1} Psi0
  Eigen::PartialPivLU<Matrix> ct_;  // (Psi0^T w0)^T
  Matrix point_;
};

Matrix retract(const Matrix& base, const Matrix& tangent);
Matrix apply_inverse_tangent_map(const Matrix& base, const Matrix& tangent, const Matrix& L);

/// (I - Psi Psi^T) B.
Matrix normal_component(const Matrix& basis, const Matrix& B);

struct RomRhs {
  Matrix Ydot;
  Matrix Wdot;
  Matrix basis_velocity;  // (Psi Psi^T - I) E W^T M^{-1}
};

RomRhs rom_rhs(const FemGrid& grid, const Matrix& basis, const Matrix& Y, const Matrix& W);

/// Right-hand sides consumed by prk_step, evaluated stage by stage.
class ReducedDynamics {
 public:
  virtual ~ReducedDynamics() = default;
  /// Stage positions Y and stage retraction (its point is the stage basis).
  virtual void begin_stage(const Matrix& Y, const CayleyRetraction& retraction) = 0;
  /// dW/dt at the current stage.
  virtual Matrix velocity_rate() = 0;
  /// dUpsilon/dt at the current stage given the stage velocities.
  virtual Matrix tangent_rate(const Matrix& W) = 0;
};

/// One step of the explicit PRK scheme; Upsilon restarts from zero.
void prk_step(const PrkTableau& tableau, double dt, ReducedState& state, ReducedDynamics& dyn);

/// Exact reduced right-hand sides (all particles, all parameters).
class ExactDynamics : public ReducedDynamics {
 public:
  ExactDynamics(const FemGrid& grid, bool evolve_basis = true)
      : grid_(grid), evolve_basis_(evolve_basis) {}
  void begin_stage(const Matrix& Y, const CayleyRetraction& retraction) override;
  Matrix velocity_rate() override;
  Matrix tangent_rate(const Matrix& W) override;

 private:
  const FemGrid& grid_;
  bool evolve_basis_;
  const CayleyRetraction* retraction_ = nullptr;
  Matrix Y_;
  Matrix field_;  // E(Psi_i Y_i), N x p
};

struct RomOptions {
  bool evolve_basis = true;
};

void prk2_step(const FemGrid& grid, ReducedState& state, const PrkTableau& tableau, double dt,
               RomOptions options = {});

/// H(Psi y_s, Psi w_s) summed over parameters.
double reduced_hamiltonian(const FemGrid& grid, const ReducedState& state);

}  // namespace vphr
