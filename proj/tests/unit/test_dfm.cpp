#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "nowcast/dfm.hpp"
#include "nowcast/error.hpp"
#include "nowcast/index.hpp"
#include "oracles.hpp"

using namespace nowcast;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double corr(const VectorXd& a, const VectorXd& b) {
  return pearson(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                 std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

DfmSpec small_spec() {
  DfmSpec s;
  s.p = 1;
  s.q = 1;
  s.beta0 = VectorXd::Constant(1, 3.0);
  s.gamma = VectorXd::Constant(1, 1.0);
  s.phi = VectorXd::Constant(1, 0.5);
  s.d = MatrixXd::Constant(1, 1, 0.2);
  s.var_eta = 1.0;
  s.var_eps = VectorXd::Constant(1, 1.0);
  return s;
}

}  // namespace

TEST(Stationarity, Examples) {
  EXPECT_TRUE(is_stationary(VectorXd()));
  EXPECT_TRUE(is_stationary(VectorXd::Constant(1, 0.99)));
  EXPECT_FALSE(is_stationary(VectorXd::Constant(1, 1.0)));
  VectorXd ar2(2);
  ar2 << 0.5, 0.6;
  EXPECT_FALSE(is_stationary(ar2));
  ar2 << 1.2, -0.5;
  EXPECT_TRUE(is_stationary(ar2));
}

TEST(Stationarity, PartialAutocorrelationRoundTrip) {
  gen::Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd partial(static_cast<Eigen::Index>(gen::index(rng, 1, 6)));
    for (auto& v : partial) v = gen::uniform(rng, -0.98, 0.98);
    const VectorXd ar = ar_from_partial(partial);
    EXPECT_TRUE(is_stationary(ar));
    EXPECT_LT((partial_from_ar(ar) - partial).norm(), 1e-9);
  }
}

TEST(StateSpace, DimensionsAndStability) {
  EXPECT_EQ(build_state_space(small_spec()).state_dim(), 2);
  gen::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = gen::index(rng, 1, 5);
    const std::size_t p = gen::index(rng, 1, 3);
    const std::size_t q = gen::index(rng, 0, 3);
    const auto spec = gen::dfm_spec(rng, n, p, q);
    const auto model = build_state_space(spec);
    EXPECT_EQ(static_cast<std::size_t>(model.state_dim()), p + n * q);
    EXPECT_EQ(static_cast<std::size_t>(model.obs_dim()), n);
    Eigen::EigenSolver<MatrixXd> es(model.transition, false);
    EXPECT_LT(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(StateSpace, SimulationMatchesDirectEquations) {
  gen::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = gen::index(rng, 1, 5);
    const std::size_t p = gen::index(rng, 1, 3);
    const std::size_t q = gen::index(rng, 0, 3);
    const auto spec = gen::dfm_spec(rng, n, p, q);
    const auto seed = static_cast<std::uint64_t>(100 + trial);
    const auto direct = simulate_dfm(spec, 80, seed, 30);
    const auto via = simulate_state_space(build_state_space(spec), 80, seed, 30);
    EXPECT_LT((direct.y - via.y).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((direct.factor.transpose() - via.states.row(0)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Simulate, NoiselessIsConstantAndLinearInGamma) {
  auto spec = small_spec();
  spec.var_eta = 0.0;
  spec.var_eps.setZero();
  const auto flat = simulate_dfm(spec, 20, 7, 0);
  EXPECT_EQ(flat.y.maxCoeff(), 3.0);
  EXPECT_EQ(flat.y.minCoeff(), 3.0);

  gen::Rng rng(4);
  auto base = gen::dfm_spec(rng, 3, 2, 1);
  base.var_eps.setZero();
  auto doubled = base;
  doubled.gamma *= 2.0;
  const auto a = simulate_dfm(base, 50, 9);
  const auto b = simulate_dfm(doubled, 50, 9);
  const MatrixXd da = a.y.colwise() - base.beta0;
  const MatrixXd db = b.y.colwise() - base.beta0;
  EXPECT_LT((db - 2.0 * da).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Simulate, DeterministicAndRejectsNonStationary) {
  const auto spec = small_spec();
  EXPECT_EQ(simulate_dfm(spec, 30, 5).y, simulate_dfm(spec, 30, 5).y);
  EXPECT_NE(simulate_dfm(spec, 30, 5).y, simulate_dfm(spec, 30, 6).y);
  auto bad = spec;
  bad.phi(0) = 1.0;
  EXPECT_THROW(simulate_dfm(bad, 30, 5), InvalidArgument);
}

TEST(Simulate, CorrelationMatchesStationaryMoments) {
  gen::Rng rng(5);
  const auto spec = gen::dfm_spec(rng, 4, 2, 2);
  const double var_x = oracle::ar_variance(spec.phi, spec.var_eta);
  VectorXd mean_r = VectorXd::Zero(4);
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const auto sim = simulate_dfm(spec, 300, static_cast<std::uint64_t>(s));
    for (Eigen::Index i = 0; i < 4; ++i) mean_r(i) += corr(sim.y.row(i).transpose(), sim.factor) / seeds;
  }
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double var_u = oracle::ar_variance(spec.d.row(i).transpose(), spec.var_eps(i));
    const double g = spec.gamma(i);
    const double theory = g * var_x / std::sqrt(var_x * (g * g * var_x + var_u));
    EXPECT_NEAR(mean_r(i), theory, 0.03) << "series " << i;
  }
}

TEST(Spec, JsonRoundTripAndValidation) {
  gen::Rng rng(6);
  const auto spec = gen::dfm_spec(rng, 3, 2, 2);
  const auto back = DfmSpec::from_json(spec.to_json());
  EXPECT_EQ(back.gamma, spec.gamma);
  EXPECT_EQ(back.d, spec.d);
  EXPECT_EQ(back.var_eta, spec.var_eta);
  auto bad = spec;
  bad.var_eps(0) = 0.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  EXPECT_NO_THROW(bad.validate(true));
  bad = spec;
  bad.phi.resize(1);
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Fit, RejectsBadPanels) {
  EXPECT_THROW(fit_dfm(MatrixXd::Random(1, 100)), InvalidArgument);
  EXPECT_THROW(fit_dfm(MatrixXd::Random(3, 30)), InvalidArgument);
  MatrixXd y = MatrixXd::Random(3, 100);
  y.row(1).setConstant(2.0);
  EXPECT_THROW(fit_dfm(y), InvalidArgument);
}

TEST(Fit, RecoversFactorWithSignAndDominance) {
  gen::Rng rng(7);
  auto spec = gen::dfm_spec(rng, 3, 1, 1);
  spec.gamma = spec.gamma.cwiseAbs();
  const auto sim = simulate_dfm(spec, 200, 11);
  MatrixXd y = sim.y;
  y(1, 17) = std::numeric_limits<double>::quiet_NaN();
  const auto fit = fit_dfm(y, {.p = 1, .q = 1});
  EXPECT_GT(fit.spec.gamma.sum(), 0.0);
  EXPECT_EQ(fit.spec.var_eta, 1.0);
  EXPECT_GT(std::abs(corr(fit.smoothed_factor, sim.factor)), 0.8);
  EXPECT_GE(fit.loglik, kalman_loglik(build_state_space(spec), y) - 1e-6);
  EXPECT_NEAR(fit.loglik, kalman_loglik(build_state_space(fit.spec), y), 1e-6 * std::abs(fit.loglik));
}

TEST(Fit, PermutingSeriesPermutesParameters) {
  gen::Rng rng(8);
  const auto spec = gen::dfm_spec(rng, 3, 1, 1);
  const auto sim = simulate_dfm(spec, 150, 12);
  const DfmFitOptions options{.p = 1, .q = 1};
  const auto a = fit_dfm(sim.y, options);
  const std::vector<Eigen::Index> order = {2, 0, 1};
  MatrixXd permuted(3, sim.y.cols());
  for (Eigen::Index i = 0; i < 3; ++i) permuted.row(i) = sim.y.row(order[static_cast<std::size_t>(i)]);
  const auto b = fit_dfm(permuted, options);
  EXPECT_LT((a.smoothed_factor - b.smoothed_factor).cwiseAbs().maxCoeff(), 1e-6);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const Eigen::Index j = order[static_cast<std::size_t>(i)];
    EXPECT_NEAR(b.spec.gamma(i), a.spec.gamma(j), 1e-6);
    EXPECT_NEAR(b.spec.d(i, 0), a.spec.d(j, 0), 1e-6);
    EXPECT_NEAR(b.spec.var_eps(i), a.spec.var_eps(j), 1e-6);
  }
}

TEST(Csv, ReadsPanelWithBlanks) {
  std::istringstream in("month,a,b\n2020-01,1,2\n2020-02,,3\n2020-03,4,5\n");
  const auto data = read_dfm_csv(in);
  EXPECT_EQ(data.names, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(data.y.rows(), 2);
  ASSERT_EQ(data.y.cols(), 3);
  EXPECT_TRUE(std::isnan(data.y(0, 1)));
  EXPECT_EQ(data.y(1, 2), 5.0);
  std::istringstream bad("month,a\n2020-01,x\n");
  EXPECT_THROW(read_dfm_csv(bad), ParseError);
}
