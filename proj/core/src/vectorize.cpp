#include "nowcast/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "nowcast/error.hpp"

namespace nowcast {

using json = nlohmann::json;

double SparseVector::squared_norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

SparseVector SparseVector::from_pairs(std::vector<std::pair<std::uint32_t, double>> pairs,
                                      std::size_t dim) {
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVector v;
  v.dim = dim;
  for (std::size_t i = 0; i < pairs.size();) {
    const std::uint32_t idx = pairs[i].first;
    if (idx >= dim) throw InvalidArgument("sparse index out of range");
    double sum = 0.0;
    for (; i < pairs.size() && pairs[i].first == idx; ++i) sum += pairs[i].second;
    if (sum != 0.0) {
      v.indices.push_back(idx);
      v.values.push_back(sum);
    }
  }
  return v;
}

SparseVector SparseVector::from_dense(std::span<const double> dense) {
  SparseVector v;
  v.dim = dense.size();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      v.indices.push_back(static_cast<std::uint32_t>(i));
      v.values.push_back(dense[i]);
    }
  }
  return v;
}

double dot(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.indices.size() && j < b.indices.size()) {
    if (a.indices[i] == b.indices[j]) {
      s += a.values[i++] * b.values[j++];
    } else if (a.indices[i] < b.indices[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return s;
}

double dot(const SparseVector& a, std::span<const double> dense) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.indices.size(); ++k) {
    if (a.indices[k] < dense.size()) s += a.values[k] * dense[a.indices[k]];
  }
  return s;
}

SparseVector scaled(const SparseVector& v, double factor) {
  if (factor == 0.0) return SparseVector{{}, {}, v.dim};
  SparseVector out = v;
  for (double& x : out.values) x *= factor;
  return out;
}

TfidfModel::TfidfModel(std::vector<std::string> vocabulary, std::vector<double> idf,
                       std::size_t n_docs)
    : vocabulary_(std::move(vocabulary)), idf_(std::move(idf)), n_docs_(n_docs) {
  if (vocabulary_.size() != idf_.size()) {
    throw InvalidArgument("tfidf vocabulary and idf sizes differ");
  }
  columns_.reserve(vocabulary_.size());
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (!(idf_[i] > 0.0) || !std::isfinite(idf_[i])) {
      throw InvalidArgument("tfidf weight for '" + vocabulary_[i] + "' must be positive");
    }
    if (!columns_.emplace(vocabulary_[i], static_cast<std::uint32_t>(i)).second) {
      throw InvalidArgument("duplicate vocabulary token '" + vocabulary_[i] + "'");
    }
  }
}

std::ptrdiff_t TfidfModel::index_of(std::string_view token) const {
  const auto it = columns_.find(std::string(token));
  return it == columns_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

SparseVector TfidfModel::transform(std::span<const std::string> tokens) const {
  std::vector<std::pair<std::uint32_t, double>> pairs;
  pairs.reserve(tokens.size());
  for (const auto& t : tokens) {
    const auto it = columns_.find(t);
    if (it != columns_.end()) pairs.emplace_back(it->second, idf_[it->second]);
  }
  SparseVector v = SparseVector::from_pairs(std::move(pairs), vocabulary_.size());
  const double norm = std::sqrt(v.squared_norm());
  if (norm > 0.0) {
    for (double& x : v.values) x /= norm;
  }
  return v;
}

std::string TfidfModel::to_json() const {
  json j = {{"version", kVersion},
            {"vocabulary", vocabulary_},
            {"idf", idf_},
            {"n_docs", n_docs_}};
  return j.dump();
}

TfidfModel TfidfModel::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("version").get<int>() != kVersion) {
      throw ParseError("unsupported tfidf model version " + j.at("version").dump());
    }
    return TfidfModel(j.at("vocabulary").get<std::vector<std::string>>(),
                      j.at("idf").get<std::vector<double>>(), j.at("n_docs").get<std::size_t>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid tfidf model: ") + e.what());
  }
}

TfidfModel fit_tfidf(std::span<const std::vector<std::string>> docs, std::size_t min_df) {
  if (docs.empty()) throw InvalidArgument("fit_tfidf needs at least one document");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    std::vector<std::string_view> uniq(doc.begin(), doc.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto t : uniq) ++df[std::string(t)];
  }
  std::vector<std::string> vocabulary;
  std::vector<double> idf;
  const double n = static_cast<double>(docs.size());
  for (const auto& [token, count] : df) {
    if (count < min_df) continue;
    vocabulary.push_back(token);
    idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  if (vocabulary.empty()) {
    throw InvalidArgument("vocabulary is empty after min_df=" + std::to_string(min_df) +
                          " pruning");
  }
  return TfidfModel(std::move(vocabulary), std::move(idf), docs.size());
}

}  // namespace nowcast
