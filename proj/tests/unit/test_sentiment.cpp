#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "nowcast/error.hpp"
#include "nowcast/sentiment.hpp"
#include "oracles.hpp"

using namespace nowcast;

namespace {

std::vector<SparseVector> rows_of(const Eigen::MatrixXd& x) {
  std::vector<SparseVector> out;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
    auto v = SparseVector::from_dense(row);
    v.dim = row.size();
    out.push_back(v);
  }
  return out;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(Labels, Encoding) {
  EXPECT_EQ(encode_label("◎"), 2.0);
  EXPECT_EQ(encode_label("○"), 1.0);
  EXPECT_EQ(encode_label("□"), 0.0);
  EXPECT_EQ(encode_label("△"), -1.0);
  EXPECT_EQ(encode_label("×"), -2.0);
  EXPECT_EQ(encode_label(Condition::kVeryBad), -2.0);
  EXPECT_THROW(encode_label("?"), InvalidArgument);
}

TEST(Ridge, HandExamples) {
  const std::vector<SparseVector> x = {SparseVector::from_dense(std::vector<double>{1.0}),
                                       SparseVector::from_dense(std::vector<double>{2.0})};
  const std::vector<double> y = {1.0, 2.0};
  const auto exact = train_ridge(x, y, {.lambda = 1e-12, .fit_intercept = false});
  EXPECT_NEAR(exact.weights()[0], 1.0, 1e-9);
  EXPECT_EQ(exact.bias(), 0.0);
  const auto shrunk = train_ridge(x, y, {.lambda = 1.0, .fit_intercept = false});
  EXPECT_NEAR(shrunk.weights()[0], 5.0 / 6.0, 1e-12);
}

TEST(Ridge, HugeLambdaGivesMean) {
  gen::Rng rng(1);
  const Eigen::MatrixXd x = gen::dense(rng, 20, 5);
  const Eigen::VectorXd y = gen::dense(rng, 20, 1);
  const auto model = train_ridge(rows_of(x), to_vec(y), {.lambda = 1e9});
  double norm = 0.0;
  for (double w : model.weights()) norm += w * w;
  EXPECT_LT(std::sqrt(norm), 1e-6);
  EXPECT_NEAR(model.bias(), y.mean(), 1e-6);
}

TEST(Ridge, PredictExamples) {
  gen::Rng rng(2);
  // Fewer rows than weights: the lambda -> 0 solution interpolates.
  const Eigen::MatrixXd x = gen::dense(rng, 5, 8);
  const Eigen::VectorXd y = gen::dense(rng, 5, 1);
  const auto rows = rows_of(x);
  const auto model = train_ridge(rows, to_vec(y), {.lambda = 1e-10, .relative_tolerance = 1e-12});
  EXPECT_DOUBLE_EQ(model.predict(SparseVector{{}, {}, 8}), model.bias());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_NEAR(model.predict(rows[i]), y(static_cast<Eigen::Index>(i)), 1e-6);
  const double base = model.predict(rows[0]) - model.bias();
  EXPECT_NEAR(model.predict(scaled(rows[0], 2.0)), 2.0 * base + model.bias(), 1e-12);
  EXPECT_THROW(model.predict(SparseVector{{}, {}, 4}), InvalidArgument);
}

TEST(Ridge, Errors) {
  const std::vector<SparseVector> x = {SparseVector::from_dense(std::vector<double>{1.0})};
  EXPECT_THROW(train_ridge(x, std::vector<double>{1.0, 2.0}, {}), InvalidArgument);
  EXPECT_THROW(train_ridge(x, std::vector<double>{1.0}, {.lambda = 0.0}), InvalidArgument);
  EXPECT_THROW(train_ridge({}, {}, {}), InvalidArgument);
}

TEST(Ridge, MatchesDenseSolve) {
  gen::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd x = gen::dense(rng, 20, 5);
    const Eigen::VectorXd y = gen::dense(rng, 20, 1);
    const double lambda = std::pow(10.0, gen::uniform(rng, -3.0, 3.0));
    const bool intercept = trial % 2 == 0;
    const auto model = train_ridge(rows_of(x), to_vec(y), {.lambda = lambda, .fit_intercept = intercept});
    const Eigen::VectorXd ref = oracle::dense_ridge(x, y, lambda, intercept);
    for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(model.weights()[static_cast<std::size_t>(j)], ref(j), 1e-6);
    EXPECT_NEAR(model.bias(), ref(5), 1e-6);
  }
}

TEST(Ridge, SparseHighDimensionalMatchesDenseSolve) {
  gen::Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<SparseVector> rows;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(40, 60);
    for (int i = 0; i < 40; ++i) {
      rows.push_back(gen::sparse(rng, 60, 0.1, false, true));
      for (std::size_t k = 0; k < rows.back().nnz(); ++k) x(i, rows.back().indices[k]) = rows.back().values[k];
    }
    const Eigen::VectorXd y = gen::dense(rng, 40, 1);
    const auto model = train_ridge(rows, to_vec(y), {.lambda = 0.5});
    const Eigen::VectorXd ref = oracle::dense_ridge(x, y, 0.5, true);
    for (Eigen::Index j = 0; j < 60; ++j) EXPECT_NEAR(model.weights()[static_cast<std::size_t>(j)], ref(j), 1e-6);
    EXPECT_NEAR(model.bias(), ref(60), 1e-6);
  }
}

TEST(Ridge, TrainingMseNondecreasingInLambda) {
  gen::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd x = gen::dense(rng, 30, 6);
    const Eigen::VectorXd y = gen::dense(rng, 30, 1);
    const auto rows = rows_of(x);
    double last = -1.0;
    for (double lambda : {1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0, 1e3}) {
      const auto model = train_ridge(rows, to_vec(y), {.lambda = lambda});
      std::vector<double> pred;
      for (const auto& r : rows) pred.push_back(model.predict(r));
      const double m = mse(pred, to_vec(y));
      EXPECT_GE(m, last - 1e-10);
      last = m;
    }
  }
}

TEST(Ridge, JsonRoundTrip) {
  const RidgeModel model({0.25, -1.5, 3.0}, 0.125, 10.0);
  const auto back = RidgeModel::from_json(model.to_json());
  EXPECT_EQ(back.weights(), model.weights());
  EXPECT_EQ(back.bias(), model.bias());
  EXPECT_EQ(back.lambda(), model.lambda());
}

TEST(Mse, Examples) {
  const std::vector<double> a = {1.0, -1.0};
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(std::vector<double>{0.0, 0.0}, a), 1.0);
  EXPECT_EQ(mse(std::vector<double>{2.0}, std::vector<double>{-2.0}), 16.0);
  EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), InvalidArgument);
  EXPECT_THROW(mse(std::vector<double>{1.0}, a), InvalidArgument);
}

TEST(Split, ReproduciblePartition) {
  for (std::size_t n : {10u, 101u, 1000u}) {
    const auto a = split_for_training(n, 42);
    const auto b = split_for_training(n, 42);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.valid, b.valid);
    EXPECT_EQ(a.test, b.test);
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.valid.begin(), a.valid.end());
    all.insert(a.test.begin(), a.test.end());
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(a.train.size() + a.valid.size() + a.test.size(), n);
    if (n == 1000) {
      EXPECT_EQ(a.test.size(), 100u);
      EXPECT_EQ(a.valid.size(), 90u);
    }
  }
  EXPECT_NE(split_for_training(1000, 1).test, split_for_training(1000, 2).test);
}

TEST(Sentiment, FitSelectsFromGridAndBeatsBaseline) {
  gen::Rng rng(6);
  std::vector<SparseVector> x;
  std::vector<double> y;
  std::vector<double> w(30);
  for (auto& v : w) v = gen::normal(rng);
  for (int i = 0; i < 600; ++i) {
    x.push_back(gen::sparse(rng, 30, 0.2, false, true));
    y.push_back(dot(x.back(), w) + 0.1 * gen::normal(rng));
  }
  const std::vector<double> grid = {0.01, 0.1, 1.0, 10.0};
  const auto fit = fit_sentiment(x, y, grid, 9);
  EXPECT_EQ(fit.report.validation_mse.size(), grid.size());
  EXPECT_TRUE(std::find(grid.begin(), grid.end(), fit.report.lambda) != grid.end());
  EXPECT_LT(fit.report.test_mse, 0.8 * fit.report.baseline_test_mse);
  EXPECT_EQ(fit.report.n_train + fit.report.n_valid + fit.report.n_test, 600u);
}

TEST(Scores, LoadExamples) {
  std::istringstream one("s1\t0.5\n\n");
  const auto r1 = load_scores(one);
  EXPECT_EQ(r1.table.size(), 1u);
  EXPECT_EQ(r1.table.find("s1"), 0.5);
  EXPECT_FALSE(r1.table.find("s2"));
  std::istringstream dup("s1\t0.5\ns1\t-1.25\n");
  const auto r2 = load_scores(dup);
  EXPECT_EQ(r2.table.find("s1"), -1.25);
  ASSERT_EQ(r2.warnings.size(), 1u);
  EXPECT_EQ(r2.warnings[0].line, 2u);
  std::istringstream bad("s0\t1\ns1\tabc\n");
  try {
    load_scores(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream notab("s1 0.5\n");
  EXPECT_THROW(load_scores(notab), ParseError);
}
