#include "nowcast/kalman.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "nowcast/error.hpp"

namespace nowcast {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void StateSpaceModel::validate() const {
  const Index m = transition.rows();
  const Index n = loading.rows();
  auto fail = [](const char* what) { throw InvalidArgument(std::string("state space: ") + what); };
  if (m == 0 || transition.cols() != m) fail("transition must be square and non-empty");
  if (selection.rows() != m) fail("selection rows must equal state dimension");
  if (state_cov.rows() != selection.cols() || state_cov.cols() != selection.cols()) {
    fail("state covariance must be r x r");
  }
  if (loading.cols() != m) fail("loading columns must equal state dimension");
  if (intercept.size() != n) fail("intercept length must equal observation dimension");
  if (obs_cov.rows() != n || obs_cov.cols() != n) fail("observation covariance must be N x N");
  if (initial_state.size() != m) fail("initial state length must equal state dimension");
  if (initial_cov.rows() != m || initial_cov.cols() != m) fail("initial covariance must be m x m");
  if (!transition.allFinite() || !selection.allFinite() || !state_cov.allFinite() ||
      !loading.allFinite() || !intercept.allFinite() || !obs_cov.allFinite() ||
      !initial_state.allFinite() || !initial_cov.allFinite()) {
    fail("non-finite parameter");
  }
}

MatrixXd solve_discrete_lyapunov(const MatrixXd& t, const MatrixXd& q) {
  const Index k = t.rows();
  if (t.cols() != k || q.rows() != k || q.cols() != k) {
    throw InvalidArgument("lyapunov: transition and noise must be square and of equal size");
  }
  if (k > 0 && Eigen::EigenSolver<MatrixXd>(t, false).eigenvalues().cwiseAbs().maxCoeff() >= 1.0) {
    throw InvalidArgument("lyapunov: transition has an eigenvalue on or outside the unit circle");
  }
  // vec(P) = (I - T kron T)^{-1} vec(Q), column-major vec.
  MatrixXd kron(k * k, k * k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) kron.block(i * k, j * k, k, k) = t(i, j) * t;
  }
  const MatrixXd system = MatrixXd::Identity(k * k, k * k) - kron;
  const VectorXd vq = Eigen::Map<const VectorXd>(q.data(), k * k);
  const VectorXd vp = system.partialPivLu().solve(vq);
  MatrixXd p = Eigen::Map<const MatrixXd>(vp.data(), k, k);
  return 0.5 * (p + p.transpose());
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2 pi)

void check_observations(const MatrixXd& y, Index n) {
  if (y.rows() != n) {
    throw InvalidArgument("observation matrix has " + std::to_string(y.rows()) +
                          " rows, model expects " + std::to_string(n));
  }
  for (Index t = 0; t < y.cols(); ++t) {
    for (Index i = 0; i < y.rows(); ++i) {
      if (std::isinf(y(i, t))) throw InvalidArgument("non-finite observation");
    }
  }
}

double min_eig(const MatrixXd& p) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(p, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// One measurement update at time t. Returns the log-likelihood contribution.
double update(const StateSpaceModel& model, const MatrixXd& y, Index t, VectorXd& a, MatrixXd& p,
              std::vector<Index>& rows) {
  rows.clear();
  for (Index i = 0; i < y.rows(); ++i) {
    if (!std::isnan(y(i, t))) rows.push_back(i);
  }
  if (rows.empty()) return 0.0;
  const auto k = static_cast<Index>(rows.size());
  const Index m = model.state_dim();
  MatrixXd z(k, m);
  VectorXd v(k);
  MatrixXd h(k, k);
  for (Index r = 0; r < k; ++r) {
    z.row(r) = model.loading.row(rows[static_cast<std::size_t>(r)]);
    v(r) = y(rows[static_cast<std::size_t>(r)], t) - model.intercept(rows[static_cast<std::size_t>(r)]);
    for (Index c = 0; c < k; ++c) {
      h(r, c) = model.obs_cov(rows[static_cast<std::size_t>(r)], rows[static_cast<std::size_t>(c)]);
    }
  }
  v -= z * a;
  const MatrixXd pz = p * z.transpose();
  MatrixXd f = z * pz + h;
  f = (0.5 * (f + f.transpose())).eval();
  const Eigen::LLT<MatrixXd> llt(f);
  if (llt.info() != Eigen::Success) {
    throw Error("singular innovation covariance at t=" + std::to_string(t + 1));
  }
  const MatrixXd& l = llt.matrixL();
  double logdet = 0.0;
  for (Index r = 0; r < k; ++r) logdet += 2.0 * std::log(l(r, r));
  const VectorXd finv_v = llt.solve(v);
  const MatrixXd gain = llt.solve(pz.transpose()).transpose();  // P Z' F^{-1}
  a += gain * v;
  p -= gain * pz.transpose();
  p = (0.5 * (p + p.transpose())).eval();
  return -0.5 * (static_cast<double>(k) * kLog2Pi + logdet + v.dot(finv_v));
}

}  // namespace

KalmanResult kalman_filter(const StateSpaceModel& model, const MatrixXd& y,
                           const KalmanOptions& options) {
  model.validate();
  check_observations(y, model.obs_dim());
  const Index m = model.state_dim();
  const Index len = y.cols();
  const MatrixXd rqr = model.selection * model.state_cov * model.selection.transpose();

  KalmanResult res;
  res.filtered.resize(m, len);
  res.predicted.resize(m, len);
  res.filtered_cov.reserve(static_cast<std::size_t>(len));
  res.predicted_cov.reserve(static_cast<std::size_t>(len));
  res.min_eigenvalue = std::numeric_limits<double>::infinity();

  auto check = [&](const MatrixXd& p, Index t) {
    if (!options.check_psd) return;
    const double e = min_eig(p);
    res.min_eigenvalue = std::min(res.min_eigenvalue, e);
    if (e < -options.psd_tolerance || !(p - p.transpose()).isZero(0.0)) {
      throw Error("state covariance lost positive semi-definiteness at t=" + std::to_string(t + 1) +
                  " (min eigenvalue " + std::to_string(e) + ")");
    }
  };

  VectorXd a = model.initial_state;
  MatrixXd p = 0.5 * (model.initial_cov + model.initial_cov.transpose());
  std::vector<Index> rows;
  for (Index t = 0; t < len; ++t) {
    res.predicted.col(t) = a;
    res.predicted_cov.push_back(p);
    check(p, t);
    const double ll = update(model, y, t, a, p, rows);
    res.loglik += ll;
    res.n_observed += rows.size();
    res.filtered.col(t) = a;
    res.filtered_cov.push_back(p);
    check(p, t);
    a = model.transition * a;
    p = model.transition * p * model.transition.transpose() + rqr;
    p = (0.5 * (p + p.transpose())).eval();
  }
  if (!std::isfinite(res.loglik)) throw Error("log-likelihood is not finite");
  if (!options.check_psd) res.min_eigenvalue = 0.0;

  if (options.smooth && len > 0) {
    res.smoothed.resize(m, len);
    res.smoothed_cov.resize(static_cast<std::size_t>(len));
    res.smoothed.col(len - 1) = res.filtered.col(len - 1);
    res.smoothed_cov.back() = res.filtered_cov.back();
    for (Index t = len - 2; t >= 0; --t) {
      const auto ut = static_cast<std::size_t>(t);
      const MatrixXd& pf = res.filtered_cov[ut];
      const MatrixXd& pp = res.predicted_cov[ut + 1];
      // J = Pf T' Pp^{-1}; a rank-revealing solve tolerates singular Pp.
      const MatrixXd jt = pp.completeOrthogonalDecomposition().solve(model.transition * pf);
      const MatrixXd j = jt.transpose();
      res.smoothed.col(t) =
          res.filtered.col(t) + j * (res.smoothed.col(t + 1) - res.predicted.col(t + 1));
      MatrixXd ps = pf + j * (res.smoothed_cov[ut + 1] - pp) * jt;
      res.smoothed_cov[ut] = 0.5 * (ps + ps.transpose());
    }
  }
  return res;
}

double kalman_loglik(const StateSpaceModel& model, const MatrixXd& y) {
  model.validate();
  check_observations(y, model.obs_dim());
  const MatrixXd rqr = model.selection * model.state_cov * model.selection.transpose();
  VectorXd a = model.initial_state;
  MatrixXd p = 0.5 * (model.initial_cov + model.initial_cov.transpose());
  std::vector<Index> rows;
  double ll = 0.0;
  for (Index t = 0; t < y.cols(); ++t) {
    ll += update(model, y, t, a, p, rows);
    a = model.transition * a;
    p = model.transition * p * model.transition.transpose() + rqr;
    p = (0.5 * (p + p.transpose())).eval();
  }
  if (!std::isfinite(ll)) throw Error("log-likelihood is not finite");
  return ll;
}

StateSpaceSimulation simulate_state_space(const StateSpaceModel& model, std::size_t length,
                                          std::uint64_t seed, std::size_t burn_in) {
  model.validate();
  const Index m = model.state_dim();
  const Index n = model.obs_dim();
  const Index r = model.selection.cols();
  // Shock scales: square roots of the covariances (PSD, zero variances allowed).
  auto sqrt_psd = [](const MatrixXd& c) -> MatrixXd {
    if (c.size() == 0) return c;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (c + c.transpose()));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  };
  const MatrixXd lq = sqrt_psd(model.state_cov);
  const MatrixXd lh = sqrt_psd(model.obs_cov);
  const bool diag_q = model.state_cov.isDiagonal();
  const bool diag_h = model.obs_cov.isDiagonal();
  const bool measurement_noise = !model.obs_cov.isZero(0.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  StateSpaceSimulation sim;
  sim.y.resize(n, static_cast<Index>(length));
  sim.states.resize(m, static_cast<Index>(length));
  VectorXd a = VectorXd::Zero(m);
  VectorXd shock(r), noise(n);
  for (std::size_t step = 0; step < burn_in + length; ++step) {
    for (Index k = 0; k < r; ++k) shock(k) = normal(rng);
    const VectorXd eta = diag_q ? VectorXd(model.state_cov.diagonal().cwiseSqrt().cwiseProduct(shock))
                                : VectorXd(lq * shock);
    a = model.transition * a + model.selection * eta;
    VectorXd obs = model.intercept + model.loading * a;
    if (measurement_noise) {
      for (Index k = 0; k < n; ++k) noise(k) = normal(rng);
      obs += diag_h ? VectorXd(model.obs_cov.diagonal().cwiseSqrt().cwiseProduct(noise))
                    : VectorXd(lh * noise);
    }
    if (step >= burn_in) {
      const auto col = static_cast<Index>(step - burn_in);
      sim.y.col(col) = obs;
      sim.states.col(col) = a;
    }
  }
  return sim;
}

}  // namespace nowcast
