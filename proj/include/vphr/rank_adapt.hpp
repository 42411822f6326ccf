// SPDX-License-Identifier: Apache-2.0
//
// Residual-based error indicator and rank updates of the reduced basis.
#pragma once

#include "vphr/fem_poisson.hpp"
#include "vphr/rom_dlr.hpp"
#include "vphr/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>

namespace vphr {

/// Position and velocity blocks of a 2N x q quantity.
struct PhaseBlocks {
  Matrix x;
  Matrix v;

  double squared_norm() const { return x.squaredNorm() + v.squaredNorm(); }
  double norm() const { return std::sqrt(squared_norm()); }
};

/// Stormer-Verlet residual R(Theta^tau, Theta^{tau-1}) column-wise, given
/// the fields at both time levels.
PhaseBlocks sv_residual(double dt, const Matrix& X1, const Matrix& V1, const Matrix& X0,
                        const Matrix& V0, const Matrix& E0, const Matrix& E1);

/// J_E(x) w, the Hessian of h applied to w.
Vector jacobian_E_matvec(const FemGrid& grid, Eigen::Ref<const Vector> x,
                         Eigen::Ref<const Vector> w);

/// dR/dTheta^{tau-1} at positions x applied to (ex, ev).
void apply_previous_jacobian(const FemGrid& grid, double dt, Eigen::Ref<const Vector> x,
                             Eigen::Ref<const Vector> ex, Eigen::Ref<const Vector> ev,
                             Eigen::Ref<Vector> out_x, Eigen::Ref<Vector> out_v);

/// -(dR/dTheta^tau)^{-1} (bx, bv) at positions x, by block substitution.
void apply_negative_inverse(const FemGrid& grid, double dt, Eigen::Ref<const Vector> x,
                            Eigen::Ref<const Vector> bx, Eigen::Ref<const Vector> bv,
                            Eigen::Ref<Vector> out_x, Eigen::Ref<Vector> out_v);

/// Tensorized Legendre polynomials of degree <= 2 on the parameter box.
class InterpolationBasis {
 public:
  static constexpr Index kSize = 6;

  InterpolationBasis(double amplitude_lo, double amplitude_hi, double spread_lo,
                     double spread_hi);
  std::array<double, kSize> evaluate(const Parameter& p) const;
  /// q x p matrix of basis values.
  Matrix evaluate(const std::vector<Parameter>& params) const;

 private:
  double a_mid_, a_half_, s_mid_, s_half_;
};

/// P = (B Pi)^+ B, samples x p. Throws NumericalError if B Pi is rank
/// deficient.
Matrix build_interpolation_operator(const std::vector<Parameter>& params, const IndexList& samples,
                                    const InterpolationBasis& basis);

/// Samples without replacement, seeded.
IndexList choose_indicator_samples(Index parameters, Index count, std::uint64_t seed);

struct RankUpdateResult {
  bool applied = false;
  double projected_norm = 0.0;
};

/// Appends the dominant direction of (I - Psi Psi^T)[E_X E_V] to the basis
/// and extends Y, W (with gamma * Psi_new^T E P if gamma = 1). Skips when
/// the projected error is below 1e-14.
RankUpdateResult rank_update(ReducedState& state, const PhaseBlocks& error, int gamma,
                             const Matrix& interpolation);

struct AdaptivityOptions {
  double c1 = 1.05;
  double c2 = 1.05;
  int gamma = 1;
  // Subtract the coefficient change of a gamma = 1 update from the stored
  // error approximations.
  bool correct_after_update = true;
};

/// Error indicator over fixed sample parameters, updated once per step.
class AdaptivityState {
 public:
  AdaptivityState(const FemGrid& grid, double dt, IndexList samples, Matrix interpolation,
                  AdaptivityOptions options);

  /// Initial error Theta^(0) - theta^(0) at the samples and the reference
  /// indicator value.
  void initialize(const ReducedState& state, const Matrix& reference_x,
                  const Matrix& reference_v);

  /// Advances the error recursion to the new reduced state and returns the
  /// indicator.
  double step(const ReducedState& state);

  bool update_due(double indicator) const;

  /// Rank update with the current error approximations; refreshes the
  /// stored reduced quantities from the updated state.
  RankUpdateResult apply_update(ReducedState& state, double indicator);

  const IndexList& samples() const { return samples_; }
  const PhaseBlocks& error() const { return error_; }
  double reference_indicator() const { return reference_; }
  int updates() const { return updates_; }
  const std::vector<double>& history() const { return history_; }

 private:
  void capture(const ReducedState& state);

  const FemGrid& grid_;
  double dt_;
  IndexList samples_;
  Matrix interpolation_;
  AdaptivityOptions options_;

  PhaseBlocks error_;
  Matrix prev_x_, prev_v_, prev_field_;
  double reference_ = 0.0;
  int updates_ = 0;
  std::vector<double> history_;
};

}  // namespace vphr
