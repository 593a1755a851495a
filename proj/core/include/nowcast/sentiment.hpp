#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nowcast/corpus.hpp"
#include "nowcast/vectorize.hpp"

namespace nowcast {

/// ◎ → 2, ○ → 1, □ → 0, △ → −1, × → −2.
double encode_label(Condition condition);
/// Symbol or ASCII alias; throws InvalidArgument for anything else.
double encode_label(std::string_view symbol);

struct RidgeOptions {
  double lambda = 1.0;
  bool fit_intercept = true;
  /// Conjugate gradient stops when ||r|| / ||b|| drops below this.
  double relative_tolerance = 1e-8;
  /// 0 picks 20 * (dim + 1) + 100.
  std::size_t max_iterations = 0;
};

/// Linear scorer w·x + b over tfidf vectors.
class RidgeModel {
 public:
  static constexpr int kVersion = 1;

  RidgeModel() = default;
  RidgeModel(std::vector<double> weights, double bias, double lambda);

  /// Unclipped w·x + b. Throws InvalidArgument on dimension mismatch.
  double predict(const SparseVector& x) const;

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  double lambda() const { return lambda_; }
  std::size_t dim() const { return weights_.size(); }

  /// Conjugate gradient iterations and final relative residual of the solve
  /// that produced this model (zero for deserialized models).
  std::size_t solver_iterations() const { return iterations_; }
  double solver_residual() const { return residual_; }

  std::string to_json() const;
  static RidgeModel from_json(std::string_view text);

 private:
  friend RidgeModel train_ridge(std::span<const SparseVector>, std::span<const double>,
                                const RidgeOptions&);

  std::vector<double> weights_;
  double bias_ = 0.0;
  double lambda_ = 1.0;
  std::size_t iterations_ = 0;
  double residual_ = 0.0;
};

/// Minimizes sum_i (y_i - w·x_i - b)^2 + lambda ||w||^2 with the bias left
/// unpenalized, by Jacobi-preconditioned conjugate gradient on the normal
/// equations. Throws InvalidArgument on size mismatch or lambda <= 0 and
/// ConvergenceError if the iteration cap is reached.
RidgeModel train_ridge(std::span<const SparseVector> x, std::span<const double> y,
                       const RidgeOptions& options);

/// Mean squared error. Throws InvalidArgument on empty or mismatched input.
double mse(std::span<const double> pred, std::span<const double> gold);

/// Random 90/10 train+validation/test split, with the 90% part further split
/// 9:1 into train and validation. Deterministic in `seed`.
struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};
DataSplit split_for_training(std::size_t n, std::uint64_t seed);

struct SentimentReport {
  double lambda = 0.0;
  std::vector<std::pair<double, double>> validation_mse;  // (lambda, mse) per grid point
  double test_mse = 0.0;
  double baseline_test_mse = 0.0;  // constant predictor at the training mean
  std::size_t n_train = 0;
  std::size_t n_valid = 0;
  std::size_t n_test = 0;
};

struct SentimentFit {
  RidgeModel model;
  SentimentReport report;
};

/// Chooses lambda from `grid` by validation MSE, refits on train+validation
/// and reports held-out test MSE next to the mean-predictor baseline.
SentimentFit fit_sentiment(std::span<const SparseVector> x, std::span<const double> y,
                           std::span<const double> grid, std::uint64_t seed);

inline constexpr double kDefaultLambdaGrid[] = {0.1, 1.0, 10.0, 100.0};

/// Sentence id → externally produced score.
class ScoreTable {
 public:
  void set(std::string id, double score) { scores_[std::move(id)] = score; }
  std::optional<double> find(const std::string& id) const;
  std::size_t size() const { return scores_.size(); }
  bool contains(const std::string& id) const { return scores_.count(id) != 0; }

 private:
  std::unordered_map<std::string, double> scores_;
};

struct ScoreLoadResult {
  ScoreTable table;
  std::vector<LineIssue> warnings;  // duplicate ids (last one wins)
};

/// Reads `sentence_id<TAB>score` lines. Blank lines are ignored. Throws
/// ParseError with the line number on a missing tab or unparseable score.
ScoreLoadResult load_scores(std::istream& in);

}  // namespace nowcast
