#include "nowcast/dfm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <random>

#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <json.hpp>

#include "csv.hpp"
#include "nowcast/error.hpp"

namespace nowcast {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::json;

namespace {

MatrixXd companion(const VectorXd& ar) {
  const Index k = ar.size();
  MatrixXd c = MatrixXd::Zero(k, k);
  c.row(0) = ar.transpose();
  for (Index i = 1; i < k; ++i) c(i, i - 1) = 1.0;
  return c;
}

Index idx(std::size_t v) { return static_cast<Index>(v); }

}  // namespace

bool is_stationary(const VectorXd& ar) {
  if (ar.size() == 0) return true;
  if (!ar.allFinite()) return false;
  Eigen::EigenSolver<MatrixXd> es(companion(ar), false);
  return es.eigenvalues().cwiseAbs().maxCoeff() < 1.0 - 1e-12;
}

void DfmSpec::validate(bool allow_zero_variance) const {
  const Index n = gamma.size();
  if (n == 0) throw InvalidArgument("dfm: at least one series required");
  if (p == 0) throw InvalidArgument("dfm: factor AR order p must be at least 1");
  if (beta0.size() != n || var_eps.size() != n || d.rows() != n || d.cols() != idx(q) ||
      phi.size() != idx(p)) {
    throw InvalidArgument("dfm: parameter shapes do not match N, p, q");
  }
  if (!beta0.allFinite() || !gamma.allFinite() || !var_eps.allFinite() || !std::isfinite(var_eta)) {
    throw InvalidArgument("dfm: non-finite parameter");
  }
  const bool eta_ok = allow_zero_variance ? var_eta >= 0.0 : var_eta > 0.0;
  const bool eps_ok = allow_zero_variance ? (var_eps.array() >= 0.0).all()
                                          : (var_eps.array() > 0.0).all();
  if (!eta_ok || !eps_ok) throw InvalidArgument("dfm: innovation variances must be positive");
  if (!is_stationary(phi)) throw InvalidArgument("dfm: factor AR polynomial is not stationary");
  for (Index i = 0; i < n; ++i) {
    if (!is_stationary(d.row(i).transpose())) {
      throw InvalidArgument("dfm: idiosyncratic AR polynomial of series " + std::to_string(i + 1) +
                            " is not stationary");
    }
  }
}

std::string DfmSpec::to_json() const {
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json dj = json::array();
  for (Index i = 0; i < d.rows(); ++i) dj.push_back(vec(d.row(i).transpose()));
  json j = {{"version", 1},  {"p", p},
            {"q", q},        {"beta0", vec(beta0)},
            {"gamma", vec(gamma)}, {"phi", vec(phi)},
            {"d", dj},       {"var_eta", var_eta},
            {"var_eps", vec(var_eps)}};
  return j.dump(2);
}

DfmSpec DfmSpec::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    auto vec = [](const json& a) {
      const auto v = a.get<std::vector<double>>();
      return VectorXd(Eigen::Map<const VectorXd>(v.data(), idx(v.size())));
    };
    DfmSpec s;
    s.p = j.at("p").get<std::size_t>();
    s.q = j.at("q").get<std::size_t>();
    s.beta0 = vec(j.at("beta0"));
    s.gamma = vec(j.at("gamma"));
    s.phi = vec(j.at("phi"));
    s.var_eta = j.at("var_eta").get<double>();
    s.var_eps = vec(j.at("var_eps"));
    const auto& dj = j.at("d");
    s.d = MatrixXd::Zero(idx(dj.size()), idx(s.q));
    for (std::size_t i = 0; i < dj.size(); ++i) {
      const VectorXd row = vec(dj[i]);
      if (row.size() != idx(s.q)) throw ParseError("dfm spec: d rows must have q entries");
      s.d.row(idx(i)) = row.transpose();
    }
    s.validate(true);
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid dfm spec: ") + e.what());
  }
}

StateSpaceModel build_state_space(const DfmSpec& spec) {
  spec.validate(true);
  const Index n = idx(spec.n_series());
  const Index p = idx(spec.p);
  const Index q = idx(spec.q);
  const Index m = p + n * q;
  const Index r = q > 0 ? 1 + n : 1;

  StateSpaceModel ss;
  ss.transition = MatrixXd::Zero(m, m);
  ss.selection = MatrixXd::Zero(m, r);
  ss.state_cov = MatrixXd::Zero(r, r);
  ss.loading = MatrixXd::Zero(n, m);
  ss.intercept = spec.beta0;
  ss.obs_cov = MatrixXd::Zero(n, n);
  ss.initial_state = VectorXd::Zero(m);
  ss.initial_cov = MatrixXd::Zero(m, m);

  const MatrixXd phi_c = companion(spec.phi);
  ss.transition.topLeftCorner(p, p) = phi_c;
  ss.selection(0, 0) = 1.0;
  ss.state_cov(0, 0) = spec.var_eta;
  MatrixXd qf = MatrixXd::Zero(p, p);
  qf(0, 0) = spec.var_eta;
  ss.initial_cov.topLeftCorner(p, p) = solve_discrete_lyapunov(phi_c, qf);
  ss.loading.col(0) = spec.gamma;

  for (Index i = 0; i < n; ++i) {
    if (q == 0) {
      ss.obs_cov(i, i) = spec.var_eps(i);
      continue;
    }
    const Index off = p + i * q;
    const MatrixXd di = companion(spec.d.row(i).transpose());
    ss.transition.block(off, off, q, q) = di;
    ss.selection(off, 1 + i) = 1.0;
    ss.state_cov(1 + i, 1 + i) = spec.var_eps(i);
    MatrixXd qi = MatrixXd::Zero(q, q);
    qi(0, 0) = spec.var_eps(i);
    ss.initial_cov.block(off, off, q, q) = solve_discrete_lyapunov(di, qi);
    ss.loading(i, off) = 1.0;
  }
  return ss;
}

DfmSimulation simulate_dfm(const DfmSpec& spec, std::size_t length, std::uint64_t seed,
                           std::size_t burn_in) {
  spec.validate(true);
  const Index n = idx(spec.n_series());
  const Index p = idx(spec.p);
  const Index q = idx(spec.q);
  if (length < spec.p + spec.q + 1) {
    throw InvalidArgument("simulate_dfm: length must be at least p + q + 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd_eta = std::sqrt(spec.var_eta);
  const VectorXd sd_eps = spec.var_eps.cwiseSqrt();

  DfmSimulation sim;
  sim.y.resize(n, idx(length));
  sim.factor.resize(idx(length));
  sim.idiosyncratic.resize(n, idx(length));
  // Lag buffers, most recent first.
  VectorXd x_lags = VectorXd::Zero(p);
  MatrixXd u_lags = MatrixXd::Zero(n, std::max<Index>(q, 1));
  VectorXd u(n);
  for (std::size_t step = 0; step < burn_in + length; ++step) {
    const double x = spec.phi.dot(x_lags) + sd_eta * normal(rng);
    for (Index i = 0; i < n; ++i) {
      const double eps = sd_eps(i) * normal(rng);
      u(i) = q > 0 ? spec.d.row(i).dot(u_lags.row(i).head(q)) + eps : eps;
    }
    for (Index k = p - 1; k > 0; --k) x_lags(k) = x_lags(k - 1);
    x_lags(0) = x;
    for (Index k = q - 1; k > 0; --k) u_lags.col(k) = u_lags.col(k - 1);
    if (q > 0) u_lags.col(0) = u;
    if (step >= burn_in) {
      const Index t = idx(step - burn_in);
      sim.factor(t) = x;
      sim.idiosyncratic.col(t) = u;
      sim.y.col(t) = spec.beta0 + spec.gamma * x + u;
    }
  }
  return sim;
}

VectorXd ar_from_partial(const VectorXd& partial) {
  const Index k = partial.size();
  VectorXd phi = VectorXd::Zero(k);
  VectorXd prev(k);
  for (Index j = 0; j < k; ++j) {
    prev = phi;
    phi(j) = partial(j);
    for (Index i = 0; i < j; ++i) phi(i) = prev(i) - partial(j) * prev(j - 1 - i);
  }
  return phi;
}

VectorXd partial_from_ar(const VectorXd& ar) {
  const Index k = ar.size();
  VectorXd partial(k);
  VectorXd phi = ar;
  for (Index j = k - 1; j >= 0; --j) {
    const double r = phi(j);
    if (!(std::abs(r) < 1.0)) throw InvalidArgument("AR coefficients are not stationary");
    partial(j) = r;
    VectorXd next(j);
    for (Index i = 0; i < j; ++i) next(i) = (phi(i) + r * phi(j - 1 - i)) / (1.0 - r * r);
    phi = next;
  }
  return partial;
}

namespace {

struct Standardized {
  MatrixXd y;
  VectorXd mean;
  VectorXd scale;
};

Standardized standardize(const MatrixXd& y) {
  Standardized s;
  const Index n = y.rows();
  s.y = y;
  s.mean.resize(n);
  s.scale.resize(n);
  for (Index i = 0; i < n; ++i) {
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (Index t = 0; t < y.cols(); ++t) {
      if (std::isnan(y(i, t))) continue;
      sum += y(i, t);
      ++count;
    }
    if (count < 2) throw InvalidArgument("dfm: series " + std::to_string(i + 1) + " has < 2 values");
    const double mu = sum / static_cast<double>(count);
    for (Index t = 0; t < y.cols(); ++t) {
      if (!std::isnan(y(i, t))) sq += (y(i, t) - mu) * (y(i, t) - mu);
    }
    const double sd = std::sqrt(sq / static_cast<double>(count));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
      throw InvalidArgument("dfm: series " + std::to_string(i + 1) + " is constant");
    }
    s.mean(i) = mu;
    s.scale(i) = sd;
    s.y.row(i) = (y.row(i).array() - mu) / sd;
  }
  return s;
}

// OLS AR(k) fit; returns coefficients and writes the residual variance.
VectorXd fit_ar(const VectorXd& v, Index k, double& resid_var) {
  const Index len = v.size();
  if (k == 0) {
    resid_var = v.squaredNorm() / static_cast<double>(len);
    return VectorXd(0);
  }
  MatrixXd x(len - k, k);
  const VectorXd target = v.tail(len - k);
  for (Index t = k; t < len; ++t) {
    for (Index j = 0; j < k; ++j) x(t - k, j) = v(t - 1 - j);
  }
  VectorXd coef = x.colPivHouseholderQr().solve(target);
  resid_var = (target - x * coef).squaredNorm() / static_cast<double>(len - k);
  // Shrink toward zero until stationary; scaling c_j by s^j scales the roots.
  for (int guard = 0; guard < 200 && !is_stationary(coef); ++guard) {
    for (Index j = 0; j < k; ++j) coef(j) *= std::pow(0.95, static_cast<double>(j + 1));
  }
  return coef;
}

constexpr double kMaxPartial = 0.9999;

double to_unconstrained_partial(double r) {
  return std::atanh(std::clamp(r, -0.95, 0.95));
}

// Unconstrained parameter layout (standardized data):
//   [beta0 (N) | gamma (N) | phi partials (p) | d partials (N q) | log var_eps (N)]
struct Layout {
  Index n, p, q;
  Index size() const { return 3 * n + p + n * q; }
  Index beta() const { return 0; }
  Index gamma() const { return n; }
  Index phi() const { return 2 * n; }
  Index d(Index i) const { return 2 * n + p + i * q; }
  Index logvar() const { return 2 * n + p + n * q; }
};

VectorXd partials_from(const VectorXd& z) {
  VectorXd r(z.size());
  for (Index j = 0; j < z.size(); ++j) r(j) = std::clamp(std::tanh(z(j)), -kMaxPartial, kMaxPartial);
  return r;
}

DfmSpec unpack(const Layout& lay, const double* theta) {
  const Eigen::Map<const VectorXd> th(theta, lay.size());
  DfmSpec s;
  s.p = static_cast<std::size_t>(lay.p);
  s.q = static_cast<std::size_t>(lay.q);
  s.beta0 = th.segment(lay.beta(), lay.n);
  s.gamma = th.segment(lay.gamma(), lay.n);
  s.phi = ar_from_partial(partials_from(th.segment(lay.phi(), lay.p)));
  s.d.resize(lay.n, lay.q);
  for (Index i = 0; i < lay.n; ++i) {
    if (lay.q > 0) s.d.row(i) = ar_from_partial(partials_from(th.segment(lay.d(i), lay.q))).transpose();
  }
  s.var_eta = 1.0;
  s.var_eps = th.segment(lay.logvar(), lay.n).array().min(30.0).exp();
  return s;
}

struct Objective {
  const MatrixXd* y;
  Layout lay;
  double scale;  // 1 / observed cells
};

constexpr double kPenalty = 1e10;

double objective_value(const gsl_vector* x, void* params) {
  const auto& obj = *static_cast<const Objective*>(params);
  try {
    const DfmSpec spec = unpack(obj.lay, x->data);
    const double ll = kalman_loglik(build_state_space(spec), *obj.y);
    return std::isfinite(ll) ? -ll * obj.scale : kPenalty;
  } catch (const Error&) {
    return kPenalty;
  }
}

void objective_gradient(const gsl_vector* x, void* params, gsl_vector* g) {
  const std::size_t n = x->size;
  std::vector<double> work(x->data, x->data + n);
  gsl_vector_view wv = gsl_vector_view_array(work.data(), n);
  for (std::size_t k = 0; k < n; ++k) {
    const double h = 1e-5 * (1.0 + std::abs(work[k]));
    const double orig = work[k];
    work[k] = orig + h;
    const double fp = objective_value(&wv.vector, params);
    work[k] = orig - h;
    const double fm = objective_value(&wv.vector, params);
    work[k] = orig;
    gsl_vector_set(g, k, (fp - fm) / (2.0 * h));
  }
}

void objective_both(const gsl_vector* x, void* params, double* f, gsl_vector* g) {
  *f = objective_value(x, params);
  objective_gradient(x, params, g);
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fdfminimizer* m) const { gsl_multimin_fdfminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

// Moment-based start: leading principal component as factor proxy.
VectorXd initial_theta(const Layout& lay, const MatrixXd& ystd) {
  const MatrixXd filled = ystd.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : v; });
  const MatrixXd cov = filled * filled.transpose() / static_cast<double>(filled.cols());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
  VectorXd w = es.eigenvectors().col(es.eigenvectors().cols() - 1);
  if (w.sum() < 0.0) w = -w;
  VectorXd f = filled.transpose() * w;

  double innov = 0.0;
  VectorXd phi = fit_ar(f, lay.p, innov);
  const double fscale = std::sqrt(std::max(innov, 1e-8));
  f /= fscale;

  VectorXd theta(lay.size());
  theta.segment(lay.phi(), lay.p) = partial_from_ar(phi).unaryExpr(&to_unconstrained_partial);
  const double fvar = f.squaredNorm() / static_cast<double>(f.size());
  for (Index i = 0; i < lay.n; ++i) {
    const VectorXd yi = filled.row(i).transpose();
    const double g = yi.dot(f) / static_cast<double>(f.size()) / fvar;
    const VectorXd resid = yi - g * f;
    double var = 0.0;
    const VectorXd d = fit_ar(resid, lay.q, var);
    theta(lay.beta() + i) = 0.0;
    theta(lay.gamma() + i) = g;
    if (lay.q > 0) {
      theta.segment(lay.d(i), lay.q) = partial_from_ar(d).unaryExpr(&to_unconstrained_partial);
    }
    theta(lay.logvar() + i) = std::log(std::max(var, 1e-3));
  }
  return theta;
}

}  // namespace

DfmFit fit_dfm(const MatrixXd& y, const DfmFitOptions& options) {
  const Index n = y.rows();
  const Index len = y.cols();
  if (n < 2) throw InvalidArgument("dfm: need at least two series");
  if (options.p == 0) throw InvalidArgument("dfm: factor AR order p must be at least 1");
  if (static_cast<std::size_t>(len) < 10 * (options.p + options.q)) {
    throw InvalidArgument("dfm: need T >= 10 (p + q) observations, got " + std::to_string(len));
  }
  for (Index t = 0; t < len; ++t) {
    for (Index i = 0; i < n; ++i) {
      if (std::isinf(y(i, t))) throw InvalidArgument("dfm: non-finite observation");
    }
  }
  const Standardized st = standardize(y);
  const Layout lay{n, idx(options.p), idx(options.q)};

  std::size_t observed = 0;
  for (Index t = 0; t < len; ++t) {
    for (Index i = 0; i < n; ++i) observed += std::isnan(st.y(i, t)) ? 0 : 1;
  }
  Objective obj{&st.y, lay, 1.0 / static_cast<double>(observed)};

  gsl_set_error_handler_off();
  const auto dim = static_cast<std::size_t>(lay.size());
  gsl_multimin_function_fdf fdf{&objective_value, &objective_gradient, &objective_both, dim, &obj};
  const VectorXd theta0 = initial_theta(lay, st.y);
  std::unique_ptr<gsl_vector, VectorDeleter> x0(gsl_vector_alloc(dim));
  for (std::size_t k = 0; k < dim; ++k) gsl_vector_set(x0.get(), k, theta0(idx(k)));
  std::unique_ptr<gsl_multimin_fdfminimizer, MinimizerDeleter> minimizer(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, dim));
  gsl_multimin_fdfminimizer_set(minimizer.get(), &fdf, x0.get(), 0.1, 0.1);

  std::size_t iter = 0;
  int stalls = 0;
  bool converged = false;
  while (iter < options.max_iterations) {
    ++iter;
    const int status = gsl_multimin_fdfminimizer_iterate(minimizer.get());
    if (gsl_multimin_test_gradient(minimizer->gradient, options.gradient_tolerance) == GSL_SUCCESS) {
      converged = true;
      break;
    }
    if (status == GSL_ENOPROG || status == GSL_ETOLF || status == GSL_ETOLX) {
      // Line search could not improve: rebuild the Hessian approximation.
      if (++stalls > 5) break;
      gsl_multimin_fdfminimizer_restart(minimizer.get());
    } else if (status != GSL_SUCCESS) {
      break;
    }
  }
  const double gnorm = gsl_blas_dnrm2(minimizer->gradient);
  // A stalled line search right at the optimum is accepted when the gradient
  // is within a decade of the tolerance.
  if (!converged && !(gnorm < 10.0 * options.gradient_tolerance)) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "dfm: optimizer stopped after %zu iterations with gradient norm %.3g",
                  iter, gnorm);
    throw ConvergenceError(msg, gnorm);
  }

  DfmSpec spec = unpack(lay, minimizer->x->data);
  spec.beta0 = st.mean + st.scale.cwiseProduct(spec.beta0);
  spec.gamma = st.scale.cwiseProduct(spec.gamma);
  spec.var_eps = st.scale.array().square().matrix().cwiseProduct(spec.var_eps);
  if (spec.gamma.sum() < 0.0) spec.gamma = -spec.gamma;

  const KalmanResult kr = kalman_filter(build_state_space(spec), y);
  DfmFit fit;
  fit.spec = spec;
  fit.loglik = kr.loglik;
  fit.filtered_factor = kr.filtered.row(0).transpose();
  fit.smoothed_factor = kr.smoothed.row(0).transpose();
  fit.iterations = iter;
  fit.gradient_norm = gnorm;
  return fit;
}

DfmData read_dfm_csv(std::istream& in) {
  detail::CsvReader reader(in);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() < 2 || detail::trim(f[0]) != "month") {
    throw ParseError("dfm CSV header must be month,series1,...,seriesN", 1);
  }
  DfmData data;
  for (std::size_t k = 1; k < f.size(); ++k) data.names.emplace_back(detail::trim(f[k]));
  std::vector<std::vector<double>> cols(data.names.size());
  while (reader.next(f)) {
    const auto line = reader.record_line();
    if (f.size() == 1 && detail::trim(f[0]).empty()) continue;
    if (f.size() != data.names.size() + 1) {
      throw ParseError("expected " + std::to_string(data.names.size() + 1) + " fields", line);
    }
    try {
      data.months.push_back(parse_bucket_label(detail::trim(f[0]), BucketUnit::kMonth));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line);
    }
    if (data.months.size() >= 2 && !(data.months[data.months.size() - 2] < data.months.back())) {
      throw ParseError("months must be strictly increasing", line);
    }
    for (std::size_t k = 1; k < f.size(); ++k) {
      const std::string_view cell = detail::trim(f[k]);
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!cell.empty()) {
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
          throw ParseError("unparseable value '" + std::string(cell) + "'", line);
        }
      }
      cols[k - 1].push_back(v);
    }
  }
  data.y.resize(idx(data.names.size()), idx(data.months.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    for (std::size_t t = 0; t < cols[i].size(); ++t) data.y(idx(i), idx(t)) = cols[i][t];
  }
  return data;
}

void write_factor_csv(std::ostream& out, std::span<const Bucket> months, const DfmFit& fit) {
  out << "month,filtered,smoothed\n";
  char buf[96];
  for (std::size_t t = 0; t < months.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", fit.filtered_factor(idx(t)),
                  fit.smoothed_factor(idx(t)));
    out << months[t].label() << ',' << buf << '\n';
  }
}

}  // namespace nowcast
