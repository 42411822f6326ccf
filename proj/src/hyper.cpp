// SPDX-License-Identifier: Apache-2.0
#include "vphr/hyper.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace vphr {

namespace {

// Element and local coordinate of a set of particles.
struct Located {
  std::vector<Index> element;
  std::vector<double> theta;
};

Located locate_rows(const FemGrid& grid, Eigen::Ref<const Vector> x) {
  Located loc;
  loc.element.resize(static_cast<std::size_t>(x.size()));
  loc.theta.resize(static_cast<std::size_t>(x.size()));
  for (Index l = 0; l < x.size(); ++l) grid.locate(x[l], loc.element[l], loc.theta[l]);
  count_particle_evaluations(static_cast<std::uint64_t>(x.size()));
  return loc;
}

inline double mode_value(const HamiltonianDecomposition& dec, Index cells, Index e, double theta,
                         Index k) {
  const Index right = e + 1 == cells ? 0 : e + 1;
  return dec.nodal(e, k) * (1.0 - theta) + dec.nodal(right, k) * theta;
}

inline double mode_slope(const HamiltonianDecomposition& dec, Index cells, double inv_dx, Index e,
                         Index k) {
  const Index right = e + 1 == cells ? 0 : e + 1;
  return (dec.nodal(right, k) - dec.nodal(e, k)) * inv_dx;
}

void fill_mode(const FemGrid& grid, const HamiltonianDecomposition& dec, const Located& loc,
               Index k, Vector& value, Vector& slope) {
  const auto n = static_cast<Index>(loc.element.size());
  const double inv_dx = 1.0 / grid.dx();
  value.resize(n);
  slope.resize(n);
  for (Index l = 0; l < n; ++l) {
    value[l] = mode_value(dec, grid.cells(), loc.element[l], loc.theta[l], k);
    slope[l] = mode_slope(dec, grid.cells(), inv_dx, loc.element[l], k);
  }
}

void finalize_mode(EimMode& mode, const Matrix& U, double beta, bool keep) {
  const auto m = static_cast<Index>(mode.indices.size());
  if (keep) mode.basis = U;
  if (m == 0) {
    mode.beta_hat.resize(0);
    mode.weights_one.resize(0);
    return;
  }
  Matrix PtU(m, m);
  for (Index i = 0; i < m; ++i) PtU.row(i) = U.row(mode.indices[i]);
  mode.lu.compute(PtU);
  if (!(mode.lu.rcond() > 1e-14)) {
    throw NumericalError("EIM interpolation matrix is singular");
  }
  const Vector ut_one = U.colwise().sum().transpose();
  mode.weights_one = mode.lu.transpose().solve(ut_one);
  mode.beta_hat = beta * mode.weights_one;
}

void assign_slots(EimApprox& eim, Index particles) {
  std::vector<Index> slot(static_cast<std::size_t>(particles), -1);
  eim.union_indices.clear();
  for (auto& mode : eim.modes) {
    mode.slots.resize(mode.indices.size());
    for (std::size_t i = 0; i < mode.indices.size(); ++i) {
      Index& s = slot[static_cast<std::size_t>(mode.indices[i])];
      if (s < 0) {
        s = static_cast<Index>(eim.union_indices.size());
        eim.union_indices.push_back(mode.indices[i]);
      }
      mode.slots[i] = s;
    }
  }
}

// Spectral norm of a tall matrix.
double norm2(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(A);
  return svd.singularValues()[0];
}

}  // namespace

HamiltonianDecomposition::HamiltonianDecomposition(const FemGrid& grid, Index n_particles)
    : particles(n_particles) {
  if (n_particles < 1) throw std::invalid_argument("decomposition needs N >= 1");
  const Index kappa = grid.dim();
  const double N = static_cast<double>(n_particles);
  const double len = grid.length();
  alpha.resize(kappa);
  beta.resize(kappa);
  nodal = Matrix::Zero(grid.cells(), kappa);
  nodal.bottomRows(kappa) = grid.eigenvectors();
  for (Index k = 0; k < kappa; ++k) {
    const double delta = grid.eigenvalues()[k];
    alpha[k] = std::sqrt(N / (2.0 * len * delta)) * grid.load().dot(grid.eigenvectors().col(k));
    beta[k] = -std::sqrt(len / (2.0 * N * delta));
  }
}

ModeSample eval_G(const FemGrid& grid, const HamiltonianDecomposition& dec,
                  Eigen::Ref<const Vector> positions, Index k, const IndexList& subset) {
  if (k < 0 || k >= dec.modes()) throw std::out_of_range("eval_G: mode index out of range");
  Vector x;
  if (subset.empty()) {
    x = positions;
  } else {
    x.resize(static_cast<Index>(subset.size()));
    for (std::size_t i = 0; i < subset.size(); ++i) x[static_cast<Index>(i)] = positions[subset[i]];
  }
  ModeSample out;
  fill_mode(grid, dec, locate_rows(grid, x), k, out.value, out.slope);
  return out;
}

double decomposed_potential(const FemGrid& grid, const HamiltonianDecomposition& dec,
                            Eigen::Ref<const Vector> positions) {
  const Located loc = locate_rows(grid, positions);
  double h = 0.0;
  Vector value, slope;
  for (Index k = 0; k < dec.modes(); ++k) {
    fill_mode(grid, dec, loc, k, value, slope);
    const double c = dec.alpha[k] + dec.beta[k] * value.sum();
    h += c * c;
  }
  return h;
}

Matrix reduced_gradient_exact(const FemGrid& grid, const HamiltonianDecomposition& dec,
                              const Matrix& basis, const Matrix& Y) {
  const Matrix X = basis * Y;
  Matrix out(basis.cols(), Y.cols());
  Vector value, slope;
  for (Index s = 0; s < X.cols(); ++s) {
    const Located loc = locate_rows(grid, X.col(s));
    Vector weight = Vector::Zero(X.rows());
    for (Index k = 0; k < dec.modes(); ++k) {
      fill_mode(grid, dec, loc, k, value, slope);
      const double c = dec.alpha[k] + dec.beta[k] * value.sum();
      weight += (2.0 * c * dec.beta[k]) * slope;
    }
    out.col(s) = basis.transpose() * weight;
  }
  return out;
}

GreedyResult greedy_eim(const Matrix& snapshots, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("greedy_eim: tol must be positive");
  Matrix R = snapshots;
  const Index N = R.rows();
  const Index q = R.cols();
  Vector norms2 = R.colwise().squaredNorm().transpose();
  std::vector<Matrix::Index> picked;
  std::vector<Vector> columns;
  std::vector<bool> used(static_cast<std::size_t>(N), false);
  Eigen::RowVectorXd row(q);
  while (static_cast<Index>(columns.size()) < std::min(N, q)) {
    Index j = 0;
    const double best = std::sqrt(norms2.maxCoeff(&j));
    if (!(best > tol)) break;
    Vector u = R.col(j);
    Index i = 0;
    u.cwiseAbs().maxCoeff(&i);
    if (used[static_cast<std::size_t>(i)]) {
      throw NumericalError("greedy_eim: interpolation index selected twice");
    }
    used[static_cast<std::size_t>(i)] = true;
    // Interpolating the residual at the new index zeroes its row. One pass
    // per column updates it and refreshes its norm.
    row = R.row(i) / u[i];
    for (Index c = 0; c < q; ++c) {
      if (row[c] != 0.0) R.col(c).noalias() -= row[c] * u;
      R(i, c) = 0.0;
      norms2[c] = R.col(c).squaredNorm();
    }
    picked.push_back(i);
    columns.push_back(std::move(u));
  }
  GreedyResult out;
  out.basis.resize(N, static_cast<Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) out.basis.col(static_cast<Index>(c)) = columns[c];
  out.indices.assign(picked.begin(), picked.end());
  return out;
}

Vector EimMode::project(const Vector& f) const {
  const auto m = static_cast<Index>(indices.size());
  if (m == 0) return Vector::Zero(f.size());
  if (basis.cols() != m) throw std::logic_error("EimMode::project: basis was not stored");
  Vector sampled(m);
  for (Index i = 0; i < m; ++i) sampled[i] = f[indices[i]];
  return basis * lu.solve(sampled);
}

Index EimApprox::total_size() const {
  Index total = 0;
  for (const auto& m : modes) total += static_cast<Index>(m.indices.size());
  return total;
}

IndexList subsample_parameters(const Matrix& Y, const Matrix& W, Index count) {
  const Index p = Y.cols();
  if (count < 1 || count > p) {
    throw std::invalid_argument("subsample_parameters: need 1 <= count <= p");
  }
  Matrix A(Y.rows() + W.rows(), p);
  A << Y, W;
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  const auto& perm = qr.colsPermutation().indices();
  return IndexList(perm.data(), perm.data() + count);
}

namespace {

Matrix assemble_snapshots(const FemGrid& grid, const HamiltonianDecomposition& dec,
                          const Matrix& basis, const std::vector<Located>& located, Index k) {
  const Index n = basis.cols();
  const auto samples = static_cast<Index>(located.size());
  Matrix S(basis.rows(), (n + 1) * samples);
  Vector value, slope;
  for (Index s = 0; s < samples; ++s) {
    fill_mode(grid, dec, located[s], k, value, slope);
    S.col(s) = value;
    const double c = dec.alpha[k] + dec.beta[k] * value.sum();
    S.middleCols(samples + s * n, n) = (c * slope).asDiagonal() * basis;
  }
  return S;
}

std::vector<Located> locate_columns(const FemGrid& grid, const Matrix& basis, const Matrix& Y,
                                    const IndexList& columns) {
  std::vector<Located> out;
  out.reserve(columns.size());
  for (Index c : columns) out.push_back(locate_rows(grid, basis * Y.col(c)));
  return out;
}

}  // namespace

Matrix eim_snapshots(const FemGrid& grid, const HamiltonianDecomposition& dec, const Matrix& basis,
                     const Matrix& Y, const IndexList& columns, Index k) {
  return assemble_snapshots(grid, dec, basis, locate_columns(grid, basis, Y, columns), k);
}

EimApprox build_eim(const FemGrid& grid, const HamiltonianDecomposition& dec, const Matrix& basis,
                    const Matrix& Y, const Matrix& W, double tol, Index sample_count,
                    bool keep_basis) {
  if (sample_count > Y.cols()) {
    throw std::invalid_argument("build_eim: more snapshot parameters than test parameters");
  }
  EimApprox eim;
  eim.particles = basis.rows();
  eim.sample_parameters = subsample_parameters(Y, W, sample_count);
  const auto located = locate_columns(grid, basis, Y, eim.sample_parameters);
  eim.modes.resize(static_cast<std::size_t>(dec.modes()));
  for (Index k = 0; k < dec.modes(); ++k) {
    auto greedy = greedy_eim(assemble_snapshots(grid, dec, basis, located, k), tol);
    EimMode& mode = eim.modes[static_cast<std::size_t>(k)];
    mode.indices = std::move(greedy.indices);
    finalize_mode(mode, greedy.basis, dec.beta[k], keep_basis);
  }
  assign_slots(eim, basis.rows());
  return eim;
}

EimApprox identity_eim(const HamiltonianDecomposition& dec, bool keep_basis) {
  const Index N = dec.particles;
  EimApprox eim;
  eim.particles = N;
  eim.modes.resize(static_cast<std::size_t>(dec.modes()));
  for (Index k = 0; k < dec.modes(); ++k) {
    EimMode& mode = eim.modes[static_cast<std::size_t>(k)];
    mode.indices.resize(static_cast<std::size_t>(N));
    for (Index i = 0; i < N; ++i) mode.indices[i] = i;
    // The N x N factorization is only needed to project with a stored basis.
    if (keep_basis) {
      mode.basis = Matrix::Identity(N, N);
      mode.lu.compute(mode.basis);
    }
    mode.weights_one = Vector::Ones(N);
    mode.beta_hat = Vector::Constant(N, dec.beta[k]);
  }
  assign_slots(eim, N);
  return eim;
}

Matrix hyper_reduced_gradient(const FemGrid& grid, const HamiltonianDecomposition& dec,
                              const EimApprox& eim, const Matrix& basis, const Matrix& Y) {
  const Index m = eim.union_size();
  const Index n = basis.cols();
  Matrix rows(m, n);
  for (Index u = 0; u < m; ++u) rows.row(u) = basis.row(eim.union_indices[u]);
  const Matrix X = rows * Y;
  const double inv_dx = 1.0 / grid.dx();
  const Index cells = grid.cells();

  Matrix out(n, Y.cols());
  Vector weight(m);
  std::vector<Index> element(static_cast<std::size_t>(m));
  std::vector<double> theta(static_cast<std::size_t>(m));
  for (Index s = 0; s < Y.cols(); ++s) {
    for (Index u = 0; u < m; ++u) grid.locate(X(u, s), element[u], theta[u]);
    count_particle_evaluations(static_cast<std::uint64_t>(m));
    weight.setZero();
    for (Index k = 0; k < dec.modes(); ++k) {
      const EimMode& mode = eim.modes[static_cast<std::size_t>(k)];
      const auto mk = static_cast<Index>(mode.slots.size());
      if (mk == 0) continue;
      double c = dec.alpha[k];
      for (Index i = 0; i < mk; ++i) {
        const Index u = mode.slots[i];
        c += mode.beta_hat[i] * mode_value(dec, cells, element[u], theta[u], k);
      }
      for (Index i = 0; i < mk; ++i) {
        const Index u = mode.slots[i];
        weight[u] += 2.0 * c * mode.beta_hat[i] * mode_slope(dec, cells, inv_dx, element[u], k);
      }
    }
    out.col(s).noalias() = rows.transpose() * weight;
  }
  return out;
}

double hyper_reduced_potential(const FemGrid& grid, const HamiltonianDecomposition& dec,
                               const EimApprox& eim, const Matrix& basis,
                               Eigen::Ref<const Vector> y) {
  const Index m = eim.union_size();
  std::vector<Index> element(static_cast<std::size_t>(m));
  std::vector<double> theta(static_cast<std::size_t>(m));
  for (Index u = 0; u < m; ++u) {
    grid.locate(basis.row(eim.union_indices[u]).dot(y), element[u], theta[u]);
  }
  count_particle_evaluations(static_cast<std::uint64_t>(m));
  double h = 0.0;
  for (Index k = 0; k < dec.modes(); ++k) {
    const EimMode& mode = eim.modes[static_cast<std::size_t>(k)];
    double c = dec.alpha[k];
    for (std::size_t i = 0; i < mode.slots.size(); ++i) {
      const Index u = mode.slots[i];
      c += mode.beta_hat[static_cast<Index>(i)] *
           mode_value(dec, grid.cells(), element[u], theta[u], k);
    }
    h += c * c;
  }
  return h;
}

double k1_closed_form(double length, Index cells) {
  const double nx = static_cast<double>(cells);
  return length / std::sqrt(nx) / std::sqrt(1.0 - std::cos(std::numbers::pi / nx));
}

BoundConstants compute_bound_constants(const FemGrid& grid, const EimApprox& eim) {
  BoundConstants k;
  const Vector& delta = grid.eigenvalues();
  k.k1 = std::sqrt(2.0 * grid.length() / delta.minCoeff());

  const Index cells = grid.cells();
  double worst = 0.0;
  for (Index m = 0; m < grid.dim(); ++m) {
    const EimMode& mode = eim.modes[static_cast<std::size_t>(m)];
    if (mode.weights_one.size() == 0) continue;
    const Vector v = grid.eigenvectors().col(m);
    double max_slope = 0.0;
    for (Index e = 0; e < cells; ++e) {
      const double left = FemGrid::nodal(v, e);
      const double right = FemGrid::nodal(v, (e + 1) % cells);
      max_slope = std::max(max_slope, std::abs(right - left) / grid.dx());
    }
    worst = std::max(worst, mode.weights_one.norm() * max_slope / delta[m]);
  }
  k.k2 = grid.length() / std::sqrt(static_cast<double>(eim.particles)) * worst;
  return k;
}

double gradient_error_bound(const FemGrid& grid, const HamiltonianDecomposition& dec,
                            const EimApprox& eim, const Matrix& basis,
                            Eigen::Ref<const Vector> y) {
  const BoundConstants K = compute_bound_constants(grid, eim);
  const Vector x = basis * y;
  const Located loc = locate_rows(grid, x);
  double sum_f = 0.0;
  double sum_g = 0.0;
  Vector value, slope;
  for (Index k = 0; k < dec.modes(); ++k) {
    fill_mode(grid, dec, loc, k, value, slope);
    const EimMode& mode = eim.modes[static_cast<std::size_t>(k)];
    const double c = dec.alpha[k] + dec.beta[k] * value.sum();
    const Matrix F = (c * slope).asDiagonal() * basis;
    Matrix resid_f = F;
    Vector resid_g = value;
    if (!mode.indices.empty()) {
      resid_g -= mode.project(value);
      for (Index j = 0; j < F.cols(); ++j) resid_f.col(j) -= mode.project(F.col(j));
    }
    sum_f += norm2(resid_f);
    sum_g += resid_g.norm();
  }
  return K.k1 * sum_f + K.k2 * sum_g;
}

void HyperDynamics::begin_stage(const Matrix& Y, const CayleyRetraction& retraction) {
  retraction_ = &retraction;
  Y_ = Y;
}

Matrix HyperDynamics::velocity_rate() {
  return -hyper_reduced_gradient(grid_, dec_, eim_, retraction_->point(), Y_);
}

Matrix HyperDynamics::tangent_rate(const Matrix& W) {
  const Matrix& psi = retraction_->point();
  const Index p = Y_.cols();
  const Index count = std::min(options_.average_samples, p);
  const IndexList picked = subsample_parameters(Y_, W, count);
  Matrix Xs(psi.rows(), count);
  Matrix Ws(W.rows(), count);
  for (Index j = 0; j < count; ++j) {
    Xs.col(j) = psi * Y_.col(picked[j]);
    Ws.col(j) = W.col(picked[j]);
  }
  const Matrix E = ensemble_field(grid_, Xs);
  const Matrix EW = (static_cast<double>(p) / static_cast<double>(count)) * (E * Ws.transpose());
  const GramOperator gram(Y_, W);
  const Matrix L = -gram.solve_right(normal_component(psi, EW));
  return retraction_->inverse_differential(L);
}

void prk_hr_step(const FemGrid& grid, const HamiltonianDecomposition& dec, const EimApprox& eim,
                 ReducedState& state, const PrkTableau& tableau, double dt, HyperOptions options) {
  HyperDynamics dyn(grid, dec, eim, options);
  prk_step(tableau, dt, state, dyn);
}

}  // namespace vphr
