#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nowcast/calendar.hpp"
#include "nowcast/kalman.hpp"

namespace nowcast {

/// Single-index dynamic factor model
///   y_{i,t} = beta0_i + gamma_i x_t + u_{i,t}
///   x_t     = phi_1 x_{t-1} + ... + phi_p x_{t-p} + eta_t
///   u_{i,t} = d_{i,1} u_{i,t-1} + ... + d_{i,q} u_{i,t-q} + eps_{i,t}
/// with eta_t ~ N(0, var_eta) and eps_{i,t} ~ N(0, var_eps_i).
struct DfmSpec {
  std::size_t p = 2;
  std::size_t q = 2;
  Eigen::VectorXd beta0;    // N
  Eigen::VectorXd gamma;    // N
  Eigen::VectorXd phi;      // p
  Eigen::MatrixXd d;        // N x q
  double var_eta = 1.0;
  Eigen::VectorXd var_eps;  // N

  std::size_t n_series() const { return static_cast<std::size_t>(gamma.size()); }

  /// Shape checks plus stationarity of every AR polynomial. Variances must be
  /// positive unless `allow_zero_variance`.
  void validate(bool allow_zero_variance = false) const;

  std::string to_json() const;
  static DfmSpec from_json(std::string_view text);
};

/// True when every root of 1 - c_1 z - ... - c_k z^k lies outside the unit
/// circle (companion eigenvalues strictly inside it). Empty is stationary.
bool is_stationary(const Eigen::VectorXd& ar);

/// Companion-form state space with state
///   (x_t .. x_{t-p+1}, u_{1,t} .. u_{1,t-q+1}, ..., u_{N,t} .. u_{N,t-q+1}),
/// zero initial mean and the stationary covariance as initial covariance.
/// With q = 0 the idiosyncratic shocks become measurement noise.
StateSpaceModel build_state_space(const DfmSpec& spec);

struct DfmSimulation {
  Eigen::MatrixXd y;               // N x T
  Eigen::VectorXd factor;          // T
  Eigen::MatrixXd idiosyncratic;   // N x T
};

/// Draws the model directly from its equations, starting from zero state and
/// discarding `burn_in` steps. Per step: eta_t, then eps_{1..N,t}. Throws
/// InvalidArgument for a non-stationary spec.
DfmSimulation simulate_dfm(const DfmSpec& spec, std::size_t length, std::uint64_t seed,
                           std::size_t burn_in = 100);

/// Maps partial autocorrelations in (-1, 1) to stationary AR coefficients
/// (Durbin-Levinson recursion) and back.
Eigen::VectorXd ar_from_partial(const Eigen::VectorXd& partial);
Eigen::VectorXd partial_from_ar(const Eigen::VectorXd& ar);

struct DfmFitOptions {
  std::size_t p = 2;
  std::size_t q = 2;
  std::size_t max_iterations = 1000;
  /// Convergence threshold on the gradient norm of -loglik / (N T) in the
  /// unconstrained parameterization.
  double gradient_tolerance = 1e-6;
};

struct DfmFit {
  DfmSpec spec;  // on the scale of the input data, var_eta = 1
  double loglik = 0.0;
  Eigen::VectorXd filtered_factor;
  Eigen::VectorXd smoothed_factor;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
};

/// Maximum-likelihood fit by quasi-Newton (BFGS) over log-variances and
/// partial-autocorrelation transforms, starting from a principal-component
/// factor proxy. Series are standardized for the search and the spec is
/// mapped back afterwards; var_eta = 1 fixes the scale and the factor sign
/// makes sum(gamma) > 0. NaN cells are missing.
/// Throws InvalidArgument (N < 2, T < 10 (p + q), constant series) or
/// ConvergenceError carrying the final gradient norm.
DfmFit fit_dfm(const Eigen::MatrixXd& y, const DfmFitOptions& options = {});

/// Panel read from `month,series1,...,seriesN`; blanks become NaN.
struct DfmData {
  std::vector<Bucket> months;
  std::vector<std::string> names;
  Eigen::MatrixXd y;  // N x T
};

DfmData read_dfm_csv(std::istream& in);
/// Writes `month,filtered,smoothed`.
void write_factor_csv(std::ostream& out, std::span<const Bucket> months, const DfmFit& fit);

}  // namespace nowcast
