// SPDX-License-Identifier: Apache-2.0
//
// Hyper-reduction of the electric potential energy. The energy is rewritten
// exactly as a sum over stiffness eigenmodes,
//   h(x) = sum_k (alpha_k + beta_k * sum_l G^k_l(x))^2,
// where G^k(x) evaluates the k-th eigenvector at the particles. Each G^k is
// then replaced by an empirical interpolant so only a few particles are
// touched per mode.
#pragma once

#include "vphr/fem_poisson.hpp"
#include "vphr/rom_dlr.hpp"
#include "vphr/types.hpp"

namespace vphr {

struct HamiltonianDecomposition {
  Vector alpha;   // per mode
  Vector beta;    // every entry of beta^k equals beta[k]
  Matrix nodal;   // n_x x kappa: eigenvector values at all nodes, row 0 pinned to 0
  Index particles = 0;

  HamiltonianDecomposition(const FemGrid& grid, Index particles);
  Index modes() const { return alpha.size(); }
};

/// G^k and the diagonal of its Jacobian at selected particles.
struct ModeSample {
  Vector value;
  Vector slope;
};

/// Evaluates mode k (0-based) at `subset` (all particles if empty).
ModeSample eval_G(const FemGrid& grid, const HamiltonianDecomposition& dec,
                  Eigen::Ref<const Vector> positions, Index k, const IndexList& subset = {});

/// h(x) through the eigenmode sum.
double decomposed_potential(const FemGrid& grid, const HamiltonianDecomposition& dec,
                            Eigen::Ref<const Vector> positions);

/// grad_y h(Psi y) through the eigenmode sum; n x p for the columns of Y.
Matrix reduced_gradient_exact(const FemGrid& grid, const HamiltonianDecomposition& dec,
                              const Matrix& basis, const Matrix& Y);

struct GreedyResult {
  Matrix basis;        // N x m
  IndexList indices;   // m distinct rows
};

/// Greedy EIM: repeatedly takes the residual column of largest norm while
/// that norm exceeds `tol`. Throws NumericalError on a repeated index.
GreedyResult greedy_eim(const Matrix& snapshots, double tol);

struct EimMode {
  Matrix basis;          // U^k, empty if no storage was requested
  IndexList indices;     // interpolation rows
  IndexList slots;       // position of each index in the union list
  Vector beta_hat;       // (U^T P)^{-1} U^T beta^k
  Vector weights_one;    // (U^T P)^{-1} U^T 1_N, for the error bound
  Eigen::PartialPivLU<Matrix> lu;  // of P^T U

  /// Interpolant U (P^T U)^{-1} P^T f.
  Vector project(const Vector& f) const;
};

struct EimApprox {
  std::vector<EimMode> modes;
  IndexList union_indices;
  IndexList sample_parameters;  // columns used for the snapshots
  Index particles = 0;

  Index union_size() const { return static_cast<Index>(union_indices.size()); }
  Index total_size() const;
};

/// Column-pivoted QR of [Y; W]; returns the first `count` pivots.
IndexList subsample_parameters(const Matrix& Y, const Matrix& W, Index count);

/// Snapshot matrix [S_G S_F] of mode k at the given parameter columns.
Matrix eim_snapshots(const FemGrid& grid, const HamiltonianDecomposition& dec, const Matrix& basis,
                     const Matrix& Y, const IndexList& columns, Index k);

EimApprox build_eim(const FemGrid& grid, const HamiltonianDecomposition& dec, const Matrix& basis,
                    const Matrix& Y, const Matrix& W, double tol, Index sample_count,
                    bool keep_basis = false);

/// U^k = I_N for every mode (exact interpolation). The N x N bases are only
/// stored on request.
EimApprox identity_eim(const HamiltonianDecomposition& dec, bool keep_basis = false);

/// grad_y of the hyper-reduced energy, n x p. Only the union rows of Psi Y
/// are reconstructed.
Matrix hyper_reduced_gradient(const FemGrid& grid, const HamiltonianDecomposition& dec,
                              const EimApprox& eim, const Matrix& basis, const Matrix& Y);

double hyper_reduced_potential(const FemGrid& grid, const HamiltonianDecomposition& dec,
                               const EimApprox& eim, const Matrix& basis,
                               Eigen::Ref<const Vector> y);

struct BoundConstants {
  double k1 = 0.0;
  double k2 = 0.0;
};

/// General formulas for the gradient error bound.
BoundConstants compute_bound_constants(const FemGrid& grid, const EimApprox& eim);
/// Closed form of K1 for uniform P1 elements.
double k1_closed_form(double length, Index cells);

/// Right-hand side of the bound at one reduced state y; needs the mode bases.
double gradient_error_bound(const FemGrid& grid, const HamiltonianDecomposition& dec,
                            const EimApprox& eim, const Matrix& basis,
                            Eigen::Ref<const Vector> y);

struct HyperOptions {
  Index average_samples = 6;  // parameters used for the basis velocity
};

/// Hyper-reduced right-hand sides for prk_step.
class HyperDynamics : public ReducedDynamics {
 public:
  HyperDynamics(const FemGrid& grid, const HamiltonianDecomposition& dec, const EimApprox& eim,
                HyperOptions options)
      : grid_(grid), dec_(dec), eim_(eim), options_(options) {}

  void begin_stage(const Matrix& Y, const CayleyRetraction& retraction) override;
  Matrix velocity_rate() override;
  Matrix tangent_rate(const Matrix& W) override;

 private:
  const FemGrid& grid_;
  const HamiltonianDecomposition& dec_;
  const EimApprox& eim_;
  HyperOptions options_;
  const CayleyRetraction* retraction_ = nullptr;
  Matrix Y_;
};

void prk_hr_step(const FemGrid& grid, const HamiltonianDecomposition& dec, const EimApprox& eim,
                 ReducedState& state, const PrkTableau& tableau, double dt, HyperOptions options);

}  // namespace vphr
