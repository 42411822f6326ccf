// SPDX-License-Identifier: Apache-2.0
#include "vphr/rank_adapt.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/SVD>

#include <algorithm>
#include <numeric>
#include <random>

namespace vphr {

namespace {

constexpr double kSkipNorm = 1e-14;

Matrix gather_columns(const Matrix& A, const IndexList& cols) {
  Matrix out(A.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = A.col(cols[j]);
  return out;
}

}  // namespace

PhaseBlocks sv_residual(double dt, const Matrix& X1, const Matrix& V1, const Matrix& X0,
                        const Matrix& V0, const Matrix& E0, const Matrix& E1) {
  PhaseBlocks r;
  r.x = X1 - X0 - dt * (V0 - 0.5 * dt * E0);
  r.v = V1 - V0 + 0.5 * dt * (E0 + E1);
  return r;
}

Vector jacobian_E_matvec(const FemGrid& grid, Eigen::Ref<const Vector> x,
                         Eigen::Ref<const Vector> w) {
  return field_jacobian_apply(grid, x, w);
}

void apply_previous_jacobian(const FemGrid& grid, double dt, Eigen::Ref<const Vector> x,
                             Eigen::Ref<const Vector> ex, Eigen::Ref<const Vector> ev,
                             Eigen::Ref<Vector> out_x, Eigen::Ref<Vector> out_v) {
  const Vector je = field_jacobian_apply(grid, x, ex);
  out_x = -ex + 0.5 * dt * dt * je - dt * ev;
  out_v = 0.5 * dt * je - ev;
}

void apply_negative_inverse(const FemGrid& grid, double dt, Eigen::Ref<const Vector> x,
                            Eigen::Ref<const Vector> bx, Eigen::Ref<const Vector> bv,
                            Eigen::Ref<Vector> out_x, Eigen::Ref<Vector> out_v) {
  const Vector jb = field_jacobian_apply(grid, x, bx);
  out_x = -bx;
  out_v = 0.5 * dt * jb - bv;
}

InterpolationBasis::InterpolationBasis(double amplitude_lo, double amplitude_hi, double spread_lo,
                                       double spread_hi)
    : a_mid_(0.5 * (amplitude_lo + amplitude_hi)),
      a_half_(0.5 * (amplitude_hi - amplitude_lo)),
      s_mid_(0.5 * (spread_lo + spread_hi)),
      s_half_(0.5 * (spread_hi - spread_lo)) {
  if (!(a_half_ > 0.0) || !(s_half_ > 0.0)) {
    throw std::invalid_argument("InterpolationBasis: parameter box must have positive extent");
  }
}

std::array<double, InterpolationBasis::kSize> InterpolationBasis::evaluate(
    const Parameter& p) const {
  const double a = (p.amplitude - a_mid_) / a_half_;
  const double s = (p.spread - s_mid_) / s_half_;
  return {1.0, a, s, 0.5 * (3.0 * a * a - 1.0), 0.5 * (3.0 * s * s - 1.0), a * s};
}

Matrix InterpolationBasis::evaluate(const std::vector<Parameter>& params) const {
  Matrix B(kSize, static_cast<Index>(params.size()));
  for (std::size_t j = 0; j < params.size(); ++j) {
    const auto v = evaluate(params[j]);
    for (Index i = 0; i < kSize; ++i) B(i, static_cast<Index>(j)) = v[static_cast<std::size_t>(i)];
  }
  return B;
}

Matrix build_interpolation_operator(const std::vector<Parameter>& params, const IndexList& samples,
                                    const InterpolationBasis& basis) {
  if (static_cast<Index>(samples.size()) < InterpolationBasis::kSize) {
    throw std::invalid_argument("interpolation operator needs at least 6 sample parameters");
  }
  const Matrix B = basis.evaluate(params);
  const Matrix BPi = gather_columns(B, samples);
  const Matrix gram = BPi * BPi.transpose();
  Eigen::PartialPivLU<Matrix> lu(gram);
  if (!(lu.rcond() > 1e-13)) {
    throw NumericalError("interpolation basis is rank deficient at the sample parameters");
  }
  return BPi.transpose() * lu.solve(B);
}

IndexList choose_indicator_samples(Index parameters, Index count, std::uint64_t seed) {
  if (count < 1 || count > parameters) {
    throw std::invalid_argument("indicator samples: need 1 <= count <= p");
  }
  IndexList all(static_cast<std::size_t>(parameters));
  std::iota(all.begin(), all.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(count));
  std::sort(all.begin(), all.end());
  return all;
}

RankUpdateResult rank_update(ReducedState& state, const PhaseBlocks& error, int gamma,
                             const Matrix& interpolation) {
  if (gamma != 0 && gamma != 1) throw std::invalid_argument("rank_update: gamma must be 0 or 1");
  const Matrix& psi = state.basis;
  const Index N = psi.rows();
  const Index n = psi.cols();
  Matrix stacked(N, error.x.cols() + error.v.cols());
  stacked << error.x, error.v;
  stacked -= psi * (psi.transpose() * stacked);

  RankUpdateResult r;
  r.projected_norm = stacked.norm();
  if (!(r.projected_norm >= kSkipNorm)) {
    spdlog::warn("rank update skipped: error lies in the current basis span (norm {:.3e})",
                 r.projected_norm);
    return r;
  }
  Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeThinU);
  Vector dir = svd.matrixU().col(0);
  for (int pass = 0; pass < 2; ++pass) dir -= psi * (psi.transpose() * dir);
  dir.normalize();

  Matrix basis(N, n + 1);
  basis << psi, dir;
  Matrix Y = Matrix::Zero(n + 1, state.Y.cols());
  Matrix W = Matrix::Zero(n + 1, state.W.cols());
  Y.topRows(n) = state.Y;
  W.topRows(n) = state.W;
  if (gamma == 1) {
    Y += basis.transpose() * (error.x * interpolation);
    W += basis.transpose() * (error.v * interpolation);
  }
  state.basis = std::move(basis);
  state.Y = std::move(Y);
  state.W = std::move(W);
  r.applied = true;
  return r;
}

AdaptivityState::AdaptivityState(const FemGrid& grid, double dt, IndexList samples,
                                 Matrix interpolation, AdaptivityOptions options)
    : grid_(grid),
      dt_(dt),
      samples_(std::move(samples)),
      interpolation_(std::move(interpolation)),
      options_(options) {
  if (samples_.empty()) throw std::invalid_argument("AdaptivityState: no sample parameters");
  if (options_.gamma == 1 && interpolation_.rows() != static_cast<Index>(samples_.size())) {
    throw std::invalid_argument("AdaptivityState: interpolation operator has wrong shape");
  }
}

void AdaptivityState::capture(const ReducedState& state) {
  prev_x_ = state.basis * gather_columns(state.Y, samples_);
  prev_v_ = state.basis * gather_columns(state.W, samples_);
  prev_field_ = ensemble_field(grid_, prev_x_);
}

void AdaptivityState::initialize(const ReducedState& state, const Matrix& reference_x,
                                 const Matrix& reference_v) {
  capture(state);
  error_.x = reference_x - prev_x_;
  error_.v = reference_v - prev_v_;
  const double ref = std::sqrt(reference_x.squaredNorm() + reference_v.squaredNorm());
  reference_ = ref > 0.0 ? error_.norm() / ref : 0.0;
  updates_ = 0;
  history_.clear();
}

double AdaptivityState::step(const ReducedState& state) {
  const Matrix X = state.basis * gather_columns(state.Y, samples_);
  const Matrix V = state.basis * gather_columns(state.W, samples_);
  const Matrix E = ensemble_field(grid_, X);
  PhaseBlocks b = sv_residual(dt_, X, V, prev_x_, prev_v_, prev_field_, E);

  const Index q = X.cols();
  const Index N = X.rows();
  Vector cx(N), cv(N);
  PhaseBlocks next{Matrix(N, q), Matrix(N, q)};
  for (Index j = 0; j < q; ++j) {
    apply_previous_jacobian(grid_, dt_, prev_x_.col(j), error_.x.col(j), error_.v.col(j), cx, cv);
    b.x.col(j) += cx;
    b.v.col(j) += cv;
    apply_negative_inverse(grid_, dt_, X.col(j), b.x.col(j), b.v.col(j), next.x.col(j),
                           next.v.col(j));
  }
  error_ = std::move(next);
  prev_x_ = X;
  prev_v_ = V;
  prev_field_ = E;

  const double denom =
      std::sqrt((X + error_.x).squaredNorm() + (V + error_.v).squaredNorm());
  double indicator = 0.0;
  if (denom > 0.0) {
    indicator = error_.norm() / denom;
  } else {
    spdlog::warn("error indicator: zero denominator, reporting 0");
  }
  history_.push_back(indicator);
  return indicator;
}

bool AdaptivityState::update_due(double indicator) const {
  return indicator >= options_.c1 * std::pow(options_.c2, updates_) * reference_;
}

RankUpdateResult AdaptivityState::apply_update(ReducedState& state, double indicator) {
  const Matrix old_x = prev_x_;
  const Matrix old_v = prev_v_;
  RankUpdateResult r = rank_update(state, error_, options_.gamma, interpolation_);
  if (!r.applied) return r;
  ++updates_;
  reference_ = indicator;
  capture(state);
  if (options_.gamma == 1 && options_.correct_after_update) {
    error_.x -= prev_x_ - old_x;
    error_.v -= prev_v_ - old_v;
  }
  return r;
}

}  // namespace vphr
