#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/vectorize.hpp"

namespace nowcast {

struct OcsvmOptions {
  double nu = 0.1;
  /// Stop when the maximal KKT violation falls below this.
  double tol = 1e-6;
  /// Seeds the initial feasible point.
  std::uint64_t seed = 0;
  std::size_t max_iterations = 1'000'000;
  /// Kernel row cache budget.
  std::size_t cache_bytes = std::size_t{256} << 20;
};

/// nu-one-class SVM with a linear kernel. Only support vectors (alpha > 0)
/// are kept; for a linear kernel the decision function collapses onto the
/// dense weight vector w = sum_i alpha_i x_i.
class OneClassSvmModel {
 public:
  static constexpr int kVersion = 1;

  OneClassSvmModel() = default;
  OneClassSvmModel(std::vector<SparseVector> support_vectors, std::vector<double> alphas,
                   double rho, double nu, std::size_t n_train);

  /// sum_i alpha_i <sv_i, x> - rho. Inlier iff >= 0.
  double decision(const SparseVector& x) const;
  bool is_inlier(const SparseVector& x) const { return decision(x) >= 0.0; }

  /// Dual objective 1/2 alpha' Q alpha.
  double objective() const;

  double rho() const { return rho_; }
  double nu() const { return nu_; }
  std::size_t n_train() const { return n_train_; }
  /// Upper box bound 1 / (nu * n_train).
  double upper_bound() const { return 1.0 / (nu_ * static_cast<double>(n_train_)); }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<SparseVector>& support_vectors() const { return support_vectors_; }
  /// Training indices of the support vectors (empty after deserialization).
  const std::vector<std::size_t>& support_indices() const { return support_indices_; }

  std::string to_json() const;
  static OneClassSvmModel from_json(std::string_view text);

 private:
  friend OneClassSvmModel train_ocsvm(std::span<const SparseVector>, const OcsvmOptions&);

  std::vector<SparseVector> support_vectors_;
  std::vector<double> alphas_;
  std::vector<std::size_t> support_indices_;
  double rho_ = 0.0;
  double nu_ = 0.1;
  std::size_t n_train_ = 0;
  std::vector<double> weights_;
};

/// Solves the dual
///   min 1/2 a'Qa  s.t.  0 <= a_i <= 1/(nu l),  sum a_i = 1,  Q_ij = <x_i, x_j>
/// by two-variable (SMO) updates with maximal-violating-pair selection.
/// rho is the mean gradient over free support vectors, or the largest
/// gradient among bounded ones if no alpha is free.
/// Throws InvalidArgument for empty input or nu outside (0, 1], and
/// ConvergenceError (carrying the KKT gap) if the iteration cap is hit.
OneClassSvmModel train_ocsvm(std::span<const SparseVector> vectors, const OcsvmOptions& options);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct FilterReport {
  ClassMetrics inlier;
  ClassMetrics outlier;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  /// confusion[truth][predicted], index 0 = inlier, 1 = outlier.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
};

/// Per-class and macro metrics from a confusion matrix indexed
/// [truth][predicted] with 0 = inlier, 1 = outlier. Undefined precision (no
/// predictions for a class) counts as 0.
FilterReport report_from_confusion(const std::array<std::array<std::size_t, 2>, 2>& confusion);

/// Macro precision/recall/F1 of the filter over labelled inliers and
/// outliers. Throws InvalidArgument if either list is empty.
FilterReport evaluate_filter(const OneClassSvmModel& model, std::span<const SparseVector> inliers,
                             std::span<const SparseVector> outliers);

}  // namespace nowcast
