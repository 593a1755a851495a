#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nowcast {

/// Sparse real vector: indices strictly increasing and < dim, values nonzero.
struct SparseVector {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::size_t dim = 0;

  std::size_t nnz() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  double squared_norm() const;

  /// Builds from (index, value) pairs in any order; duplicate indices are
  /// summed and zeros dropped.
  static SparseVector from_pairs(std::vector<std::pair<std::uint32_t, double>> pairs,
                                 std::size_t dim);
  static SparseVector from_dense(std::span<const double> dense);
};

double dot(const SparseVector& a, const SparseVector& b);
double dot(const SparseVector& a, std::span<const double> dense);
SparseVector scaled(const SparseVector& v, double factor);

/// Vocabulary with smoothed inverse document frequencies.
///   idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1
/// Vocabulary columns are assigned in lexicographic token order.
class TfidfModel {
 public:
  static constexpr int kVersion = 1;

  TfidfModel() = default;
  TfidfModel(std::vector<std::string> vocabulary, std::vector<double> idf, std::size_t n_docs);

  std::size_t size() const { return vocabulary_.size(); }
  std::size_t n_docs() const { return n_docs_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::vector<double>& idf() const { return idf_; }

  /// Column of `token`, or -1 when out of vocabulary.
  std::ptrdiff_t index_of(std::string_view token) const;

  /// Count-weighted tfidf, L2-normalized. All-OOV input gives the zero vector.
  SparseVector transform(std::span<const std::string> tokens) const;

  std::string to_json() const;
  static TfidfModel from_json(std::string_view text);

 private:
  std::vector<std::string> vocabulary_;
  std::vector<double> idf_;
  std::size_t n_docs_ = 0;
  std::unordered_map<std::string, std::uint32_t> columns_;
};

/// Fits vocabulary and idf on tokenized documents, keeping tokens with
/// document frequency >= min_df. Throws InvalidArgument when `docs` is empty
/// or pruning leaves no vocabulary.
TfidfModel fit_tfidf(std::span<const std::vector<std::string>> docs, std::size_t min_df = 2);

}  // namespace nowcast
