// SPDX-License-Identifier: Apache-2.0
#include "vphr/rom_dlr.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace vphr {

namespace {

constexpr double kBlockRcondFloor = 1e-13;

// Rank-deficient Gram matrices show up every step once they appear, so only
// the first few are reported.
void note_truncation(Index dropped, Index n) {
  static int reported = 0;
  if (reported < 5) {
    spdlog::warn("Gram matrix truncated: {} of {} eigenvalues below threshold", dropped, n);
    if (++reported == 5) spdlog::warn("further Gram truncation warnings suppressed");
  }
}

}  // namespace

double ReducedState::orthonormality_defect() const {
  const Index n = basis.cols();
  return (basis.transpose() * basis - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
}

GramOperator::GramOperator(const Matrix& Y, const Matrix& W) {
  gram_ = Y * Y.transpose() + W * W.transpose();
  const Index n = gram_.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram_);
  const Vector& lam = eig.eigenvalues();
  const double top = n > 0 ? lam.cwiseAbs().maxCoeff() : 0.0;
  Vector inv = Vector::Zero(n);
  Index dropped = 0;
  for (Index i = 0; i < n; ++i) {
    if (top > 0.0 && lam[i] > kRelativeThreshold * top) {
      inv[i] = 1.0 / lam[i];
    } else {
      ++dropped;
    }
  }
  truncated_ = dropped > 0;
  if (truncated_) note_truncation(dropped, n);
  pinv_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix GramOperator::solve_right(const Matrix& B) const { return B * pinv_; }

PrkTableau PrkTableau::stormer_verlet_heun() {
  PrkTableau t;
  t.a[0] << 0.0, 0.0, 0.5, 0.5;
  t.b[0] << 0.5, 0.5;
  t.a[1] << 0.5, 0.0, 0.5, 0.0;
  t.b[1] << 0.5, 0.5;
  t.a[2] << 0.0, 0.0, 1.0, 0.0;
  t.b[2] << 0.5, 0.5;
  t.validate();
  return t;
}

void PrkTableau::validate() const {
  for (int i = 0; i < 2; ++i) {
    if (a[2](i, i) != 0.0 || a[2](0, 1) != 0.0) {
      throw std::invalid_argument("tableau: tangent component must be explicit");
    }
    if (a[0](i, i) != 0.0 && a[1](i, i) != 0.0) {
      throw std::invalid_argument("tableau: stage " + std::to_string(i + 1) +
                                  " is implicit in both Y and W");
    }
  }
  if (a[0](0, 1) != 0.0 || a[1](0, 1) != 0.0) {
    throw std::invalid_argument("tableau: first stage may not depend on the second");
  }
}

double PrkTableau::order_defect() const {
  double worst = 0.0;
  for (int l = 0; l < 3; ++l) {
    worst = std::max(worst, std::abs(b[l].sum() - 1.0));
    for (int r = 0; r < 3; ++r) {
      const Eigen::Vector2d c = a[r].rowwise().sum();
      worst = std::max(worst, std::abs(b[l].dot(c) - 0.5));
    }
  }
  return worst;
}

ReducedState cotangent_lift(const Matrix& X0, const Matrix& V0, Index n) {
  if (X0.rows() != V0.rows() || X0.cols() != V0.cols()) {
    throw std::invalid_argument("cotangent_lift: X0 and V0 shapes differ");
  }
  const Index N = X0.rows();
  const Index cols = 2 * X0.cols();
  if (n < 1 || n > std::min(N, cols)) {
    throw std::invalid_argument("cotangent_lift: need 1 <= n <= min(N, 2p)");
  }
  Matrix A(N, cols);
  A << X0, V0;

  Matrix basis;
  Vector sigma;
  if (N >= 2 * cols) {
    // Tall: QR first, then an SVD of the small triangular factor.
    Eigen::HouseholderQR<Matrix> qr(A);
    const Matrix R = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Matrix> svd(R, Eigen::ComputeFullU);
    sigma = svd.singularValues();
    Matrix lead = Matrix::Zero(N, n);
    lead.topRows(cols) = svd.matrixU().leftCols(n);
    basis = qr.householderQ() * lead;
  } else {
    Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU);
    sigma = svd.singularValues();
    basis = svd.matrixU().leftCols(n);
  }
  const double tol = static_cast<double>(std::max(N, cols)) *
                     std::numeric_limits<double>::epsilon() * sigma[0];
  Index rank = 0;
  while (rank < sigma.size() && sigma[rank] > tol) ++rank;
  if (n > rank) {
    throw std::invalid_argument("cotangent_lift: n = " + std::to_string(n) +
                                " exceeds rank " + std::to_string(rank) + " of [X0 V0]");
  }
  ReducedState s;
  s.basis = std::move(basis);
  s.Y = s.basis.transpose() * X0;
  s.W = s.basis.transpose() * V0;
  return s;
}

CayleyRetraction::CayleyRetraction(const Matrix& base, const Matrix& tangent)
    : base_(base), tangent_(tangent) {
  const Index N = base.rows();
  const Index n = base.cols();
  if (tangent.rows() != N || tangent.cols() != n) {
    throw std::invalid_argument("CayleyRetraction: base and tangent shapes differ");
  }
  const Matrix Z = tangent - 0.5 * base * (base.transpose() * tangent);
  F_.resize(N, 2 * n);
  G_.resize(N, 2 * n);
  F_ << Z, -base;
  G_ << base, Z;
  const Matrix K = Matrix::Identity(2 * n, 2 * n) - 0.5 * (G_.transpose() * F_);
  block_.compute(K);
  if (!(block_.rcond() > kBlockRcondFloor)) {
    throw StepSizeError("Cayley retraction: I - A/2 is singular; reduce the time step");
  }
  w0_ = solve_factor(base);
  ct_.compute(w0_.transpose() * base);
  // cay(A) Psi0 = (I - A/2)^{-1} (I + A/2) Psi0 = 2 w0 - Psi0.
  point_ = 2.0 * w0_ - base;
}

Matrix CayleyRetraction::solve_factor(const Matrix& B) const {
  // Woodbury: (I - F G^T / 2)^{-1} = I + F/2 (I - G^T F / 2)^{-1} G^T.
  return B + 0.5 * F_ * block_.solve(G_.transpose() * B);
}

Matrix CayleyRetraction::generator_times_w0(const Matrix& delta) const {
  const Matrix Zd = delta - 0.5 * base_ * (base_.transpose() * delta);
  const Matrix C = base_.transpose() * w0_;
  return Zd * C - base_ * (Zd.transpose() * w0_);
}

Matrix CayleyRetraction::differential(const Matrix& delta) const {
  // d cay(A)[B] = (I - A/2)^{-1} B (I - A/2)^{-1}, and (I - A/2)^{-1} Psi0 = w0.
  return solve_factor(generator_times_w0(delta));
}

Matrix CayleyRetraction::inverse_differential(const Matrix& L) const {
  // Solve A(Delta) w0 = (I - A/2) L for Delta = Psi0 Omega + Dperp with
  // Omega skew and Psi0^T Dperp = 0.
  const Matrix rhs = L - 0.5 * F_ * (G_.transpose() * L);
  const Matrix proj = base_.transpose() * rhs;
  const Matrix perp_rhs = rhs - base_ * proj;
  // Both parts are right-multiplied by C = Psi0^T w0: X C^{-1} = (C^{-T} X^T)^T.
  const Matrix dperp = ct_.solve(perp_rhs.transpose()).transpose();
  Matrix omega = ct_.solve((proj + dperp.transpose() * w0_).transpose()).transpose();
  omega = 0.5 * (omega - omega.transpose()).eval();
  return base_ * omega + dperp;
}

Matrix retract(const Matrix& base, const Matrix& tangent) {
  return CayleyRetraction(base, tangent).point();
}

Matrix apply_inverse_tangent_map(const Matrix& base, const Matrix& tangent, const Matrix& L) {
  return CayleyRetraction(base, tangent).inverse_differential(L);
}

Matrix normal_component(const Matrix& basis, const Matrix& B) {
  // A square basis has no complement; skip the roundoff-only subtraction,
  // which the Gram pseudo-inverse would otherwise amplify.
  if (basis.cols() == basis.rows()) return Matrix::Zero(B.rows(), B.cols());
  return B - basis * (basis.transpose() * B);
}

RomRhs rom_rhs(const FemGrid& grid, const Matrix& basis, const Matrix& Y, const Matrix& W) {
  const Matrix E = ensemble_field(grid, basis * Y);
  RomRhs r;
  r.Ydot = W;
  r.Wdot = -basis.transpose() * E;
  const Matrix EW = E * W.transpose();
  const GramOperator gram(Y, W);
  r.basis_velocity = -gram.solve_right(normal_component(basis, EW));
  return r;
}

void prk_step(const PrkTableau& tableau, double dt, ReducedState& state, ReducedDynamics& dyn) {
  const auto& a = tableau.a;
  const auto& b = tableau.b;
  const Matrix& Y0 = state.Y;
  const Matrix& W0 = state.W;
  const Matrix& base = state.basis;

  std::array<Matrix, 2> k1, k2, k3;
  for (int i = 0; i < 2; ++i) {
    Matrix ups = Matrix::Zero(base.rows(), base.cols());
    for (int j = 0; j < i; ++j) ups += dt * a[2](i, j) * k3[j];
    const CayleyRetraction retraction(base, ups);

    Matrix x1 = Y0;
    Matrix x2 = W0;
    if (a[0](i, i) == 0.0) {
      for (int j = 0; j < i; ++j) x1 += dt * a[0](i, j) * k1[j];
      dyn.begin_stage(x1, retraction);
      k2[i] = dyn.velocity_rate();
      for (int j = 0; j <= i; ++j) x2 += dt * a[1](i, j) * k2[j];
      k1[i] = x2;
    } else {
      for (int j = 0; j < i; ++j) x2 += dt * a[1](i, j) * k2[j];
      k1[i] = x2;
      for (int j = 0; j <= i; ++j) x1 += dt * a[0](i, j) * k1[j];
      dyn.begin_stage(x1, retraction);
      k2[i] = dyn.velocity_rate();
    }
    k3[i] = dyn.tangent_rate(x2);
  }

  Matrix Y1 = Y0 + dt * (b[0][0] * k1[0] + b[0][1] * k1[1]);
  Matrix W1 = W0 + dt * (b[1][0] * k2[0] + b[1][1] * k2[1]);
  const Matrix ups1 = dt * (b[2][0] * k3[0] + b[2][1] * k3[1]);
  state.basis = retract(base, ups1);
  state.Y = std::move(Y1);
  state.W = std::move(W1);
  state.time += dt;
}

void ExactDynamics::begin_stage(const Matrix& Y, const CayleyRetraction& retraction) {
  retraction_ = &retraction;
  Y_ = Y;
  field_ = ensemble_field(grid_, retraction.point() * Y);
}

Matrix ExactDynamics::velocity_rate() { return -retraction_->point().transpose() * field_; }

Matrix ExactDynamics::tangent_rate(const Matrix& W) {
  const Matrix& psi = retraction_->point();
  if (!evolve_basis_) return Matrix::Zero(psi.rows(), psi.cols());
  const Matrix EW = field_ * W.transpose();
  const GramOperator gram(Y_, W);
  const Matrix L = -gram.solve_right(normal_component(psi, EW));
  return retraction_->inverse_differential(L);
}

void prk2_step(const FemGrid& grid, ReducedState& state, const PrkTableau& tableau, double dt,
               RomOptions options) {
  ExactDynamics dyn(grid, options.evolve_basis);
  prk_step(tableau, dt, state, dyn);
}

double reduced_hamiltonian(const FemGrid& grid, const ReducedState& state) {
  const Matrix X = state.positions();
  double h = 0.5 * state.W.squaredNorm();
  for (Index s = 0; s < X.cols(); ++s) h += potential_energy(grid, X.col(s));
  return h;
}

}  // namespace vphr
