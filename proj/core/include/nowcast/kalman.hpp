#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace nowcast {

/// Linear-Gaussian state-space model
///   y_t     = c + Z a_t + e_t,        e_t ~ N(0, H)
///   a_{t+1} = T a_t + R n_t,          n_t ~ N(0, Q)
/// with a_1 ~ N(a0, P0).
struct StateSpaceModel {
  Eigen::MatrixXd transition;  // T, m x m
  Eigen::MatrixXd selection;   // R, m x r
  Eigen::MatrixXd state_cov;   // Q, r x r
  Eigen::MatrixXd loading;     // Z, N x m
  Eigen::VectorXd intercept;   // c, N
  Eigen::MatrixXd obs_cov;     // H, N x N
  Eigen::VectorXd initial_state;
  Eigen::MatrixXd initial_cov;

  Eigen::Index state_dim() const { return transition.rows(); }
  Eigen::Index obs_dim() const { return loading.rows(); }

  /// Throws InvalidArgument on inconsistent dimensions or non-finite entries.
  void validate() const;
};

/// Solves P = T P T' + Q through the Kronecker form. Requires all
/// eigenvalues of T strictly inside the unit circle.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& transition,
                                        const Eigen::MatrixXd& noise);

struct KalmanOptions {
  bool smooth = true;
  /// When set, every filtered/predicted covariance is checked for symmetry
  /// and a minimum eigenvalue >= -psd_tolerance.
  bool check_psd = false;
  double psd_tolerance = 1e-8;
};

struct KalmanResult {
  double loglik = 0.0;
  std::size_t n_observed = 0;
  Eigen::MatrixXd filtered;  // m x T, a_{t|t}
  std::vector<Eigen::MatrixXd> filtered_cov;
  Eigen::MatrixXd predicted;  // m x T, a_{t|t-1}
  std::vector<Eigen::MatrixXd> predicted_cov;
  Eigen::MatrixXd smoothed;  // m x T, a_{t|T}; empty unless smoothing ran
  std::vector<Eigen::MatrixXd> smoothed_cov;
  double min_eigenvalue = 0.0;  // smallest covariance eigenvalue seen (check_psd only)
};

/// Kalman filter with Rauch-Tung-Striebel smoothing. `y` is N x T; NaN cells
/// are missing and their measurement rows are skipped. Covariances are
/// symmetrized after every update. Throws InvalidArgument on infinite
/// observations and Error on a singular innovation covariance.
KalmanResult kalman_filter(const StateSpaceModel& model, const Eigen::MatrixXd& y,
                           const KalmanOptions& options = {});

/// Log-likelihood only, skipping the smoother and covariance storage.
double kalman_loglik(const StateSpaceModel& model, const Eigen::MatrixXd& y);

struct StateSpaceSimulation {
  Eigen::MatrixXd y;       // N x T
  Eigen::MatrixXd states;  // m x T
};

/// Draws from the model starting at a = 0 after `burn_in` discarded steps.
/// Per step: r state shocks, then N measurement shocks when H is nonzero.
StateSpaceSimulation simulate_state_space(const StateSpaceModel& model, std::size_t length,
                                          std::uint64_t seed, std::size_t burn_in);

}  // namespace nowcast
