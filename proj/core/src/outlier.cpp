#include "nowcast/outlier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <numeric>
#include <random>

#include <json.hpp>

#include "nowcast/error.hpp"

namespace nowcast {

using json = nlohmann::json;

namespace {

// LRU cache of kernel rows Q_i = (<x_i, x_k>)_k.
class KernelCache {
 public:
  KernelCache(std::span<const SparseVector> x, std::size_t budget_bytes)
      : x_(x), slot_(x.size(), lru_.end()), scratch_(x.empty() ? 0 : x[0].dim, 0.0) {
    const std::size_t row_bytes = std::max<std::size_t>(1, x.size() * sizeof(double));
    capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
  }

  const std::vector<double>& row(std::size_t i) {
    if (slot_[i] != lru_.end()) {
      lru_.splice(lru_.begin(), lru_, slot_[i]);
      return lru_.front().values;
    }
    if (lru_.size() >= capacity_) {
      slot_[lru_.back().index] = lru_.end();
      lru_.pop_back();
    }
    lru_.push_front({i, compute(i)});
    slot_[i] = lru_.begin();
    return lru_.front().values;
  }

 private:
  struct Entry {
    std::size_t index;
    std::vector<double> values;
  };

  std::vector<double> compute(std::size_t i) {
    const SparseVector& xi = x_[i];
    for (std::size_t k = 0; k < xi.nnz(); ++k) scratch_[xi.indices[k]] = xi.values[k];
    std::vector<double> out(x_.size());
    for (std::size_t t = 0; t < x_.size(); ++t) out[t] = dot(x_[t], scratch_);
    for (std::size_t k = 0; k < xi.nnz(); ++k) scratch_[xi.indices[k]] = 0.0;
    return out;
  }

  std::span<const SparseVector> x_;
  std::list<Entry> lru_;
  std::vector<std::list<Entry>::iterator> slot_;
  std::vector<double> scratch_;
  std::size_t capacity_ = 2;
};

std::vector<double> dense_weights(const std::vector<SparseVector>& svs,
                                  const std::vector<double>& alphas, std::size_t dim) {
  std::vector<double> w(dim, 0.0);
  for (std::size_t i = 0; i < svs.size(); ++i) {
    for (std::size_t k = 0; k < svs[i].nnz(); ++k) {
      w[svs[i].indices[k]] += alphas[i] * svs[i].values[k];
    }
  }
  return w;
}

void check_nu(double nu) {
  if (!(nu > 0.0 && nu <= 1.0)) {
    throw InvalidArgument("nu must lie in (0, 1], got " + std::to_string(nu));
  }
}

}  // namespace

OneClassSvmModel::OneClassSvmModel(std::vector<SparseVector> support_vectors,
                                   std::vector<double> alphas, double rho, double nu,
                                   std::size_t n_train)
    : support_vectors_(std::move(support_vectors)),
      alphas_(std::move(alphas)),
      rho_(rho),
      nu_(nu),
      n_train_(n_train) {
  check_nu(nu_);
  if (support_vectors_.size() != alphas_.size()) {
    throw InvalidArgument("support vector and alpha counts differ");
  }
  const std::size_t dim = support_vectors_.empty() ? 0 : support_vectors_.front().dim;
  for (const auto& sv : support_vectors_) {
    if (sv.dim != dim) throw InvalidArgument("support vectors have inconsistent dimensions");
  }
  weights_ = dense_weights(support_vectors_, alphas_, dim);
}

double OneClassSvmModel::decision(const SparseVector& x) const { return dot(x, weights_) - rho_; }

double OneClassSvmModel::objective() const {
  double s = 0.0;
  for (double w : weights_) s += w * w;
  return 0.5 * s;
}

std::string OneClassSvmModel::to_json() const {
  json triplets = json::array();
  for (std::size_t r = 0; r < support_vectors_.size(); ++r) {
    const auto& sv = support_vectors_[r];
    for (std::size_t k = 0; k < sv.nnz(); ++k) triplets.push_back({r, sv.indices[k], sv.values[k]});
  }
  json j = {{"version", kVersion},
            {"kernel", "linear"},
            {"nu", nu_},
            {"rho", rho_},
            {"n_train", n_train_},
            {"alphas", alphas_},
            {"support_vectors",
             {{"rows", support_vectors_.size()}, {"dim", weights_.size()}, {"triplets", triplets}}}};
  return j.dump();
}

OneClassSvmModel OneClassSvmModel::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("version").get<int>() != kVersion) {
      throw ParseError("unsupported one-class SVM model version " + j.at("version").dump());
    }
    if (j.value("kernel", std::string("linear")) != "linear") {
      throw ParseError("only the linear kernel is supported");
    }
    const auto& svs = j.at("support_vectors");
    const auto rows = svs.at("rows").get<std::size_t>();
    const auto dim = svs.at("dim").get<std::size_t>();
    std::vector<std::vector<std::pair<std::uint32_t, double>>> pairs(rows);
    for (const auto& t : svs.at("triplets")) {
      const auto r = t.at(0).get<std::size_t>();
      if (r >= rows) throw ParseError("support vector triplet row out of range");
      pairs[r].emplace_back(t.at(1).get<std::uint32_t>(), t.at(2).get<double>());
    }
    std::vector<SparseVector> vectors;
    vectors.reserve(rows);
    for (auto& p : pairs) vectors.push_back(SparseVector::from_pairs(std::move(p), dim));
    OneClassSvmModel m(std::move(vectors), j.at("alphas").get<std::vector<double>>(),
                       j.at("rho").get<double>(), j.at("nu").get<double>(),
                       j.at("n_train").get<std::size_t>());
    if (m.weights_.size() != dim) m.weights_.resize(dim, 0.0);
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid one-class SVM model: ") + e.what());
  }
}

OneClassSvmModel train_ocsvm(std::span<const SparseVector> x, const OcsvmOptions& options) {
  check_nu(options.nu);
  if (x.empty()) throw InvalidArgument("train_ocsvm needs at least one vector");
  const std::size_t n = x.size();
  const std::size_t dim = x[0].dim;
  for (const auto& v : x) {
    if (v.dim != dim) throw InvalidArgument("training vectors have inconsistent dimensions");
  }
  const double upper = 1.0 / (options.nu * static_cast<double>(n));

  // Feasible start: fill floor(nu l) randomly chosen alphas to the bound and
  // put the remainder on the next one.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> alpha(n, 0.0);
  double remaining = 1.0;
  for (std::size_t k = 0; k < n && remaining > 0.0; ++k) {
    const double a = std::min(upper, remaining);
    alpha[order[k]] = a;
    remaining -= a;
    if (remaining < 1e-15) remaining = 0.0;
  }

  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = x[i].squared_norm();

  // Gradient G = Q alpha through the primal weight vector.
  std::vector<double> grad(n);
  {
    std::vector<double> w(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < x[i].nnz(); ++k) w[x[i].indices[k]] += alpha[i] * x[i].values[k];
    }
    for (std::size_t i = 0; i < n; ++i) grad[i] = dot(x[i], w);
  }

  KernelCache cache(x, options.cache_bytes);
  constexpr double kTau = 1e-12;
  std::size_t iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (;;) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (alpha[t] < upper && -grad[t] >= gmax) {
        gmax = -grad[t];
        i = t;
      }
      if (alpha[t] > 0.0 && -grad[t] < gmin) gmin = -grad[t];
    }
    gap = gmax - gmin;
    if (i == n || gap < options.tol) break;
    if (iter >= options.max_iterations) {
      throw ConvergenceError("one-class SVM did not converge within " +
                                 std::to_string(options.max_iterations) +
                                 " updates; KKT gap " + std::to_string(gap),
                             gap);
    }
    ++iter;

    // Capacity >= 2 keeps row i resident while row j is fetched.
    const std::vector<double>& qi = cache.row(i);
    std::size_t j = n;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (!(alpha[t] > 0.0)) continue;
      const double b = gmax + grad[t];
      if (b <= 0.0) continue;
      double a = diag[i] + diag[t] - 2.0 * qi[t];
      if (a <= 0.0) a = kTau;
      const double score = -(b * b) / a;
      if (score <= best) {
        best = score;
        j = t;
      }
    }
    if (j == n) break;
    const std::vector<double>& qj = cache.row(j);

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    double quad = diag[i] + diag[j] - 2.0 * qi[j];
    if (quad <= 0.0) quad = kTau;
    const double delta = (grad[i] - grad[j]) / quad;
    const double sum = old_i + old_j;
    double ai = old_i - delta;
    double aj = old_j + delta;
    if (sum > upper) {
      if (ai > upper) {
        ai = upper;
        aj = sum - upper;
      }
    } else if (aj < 0.0) {
      aj = 0.0;
      ai = sum;
    }
    if (sum > upper) {
      if (aj > upper) {
        aj = upper;
        ai = sum - upper;
      }
    } else if (ai < 0.0) {
      ai = 0.0;
      aj = sum;
    }
    alpha[i] = ai;
    alpha[j] = aj;
    const double di = ai - old_i;
    const double dj = aj - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += qi[t] * di + qj[t] * dj;
  }

  double free_sum = 0.0;
  std::size_t free_count = 0;
  double bounded_max = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0 && alpha[t] < upper) {
      free_sum += grad[t];
      ++free_count;
    } else if (alpha[t] > 0.0) {
      bounded_max = std::max(bounded_max, grad[t]);
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : bounded_max;

  std::vector<SparseVector> svs;
  std::vector<double> alphas;
  std::vector<std::size_t> indices;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      svs.push_back(x[t]);
      alphas.push_back(alpha[t]);
      indices.push_back(t);
    }
  }
  OneClassSvmModel model(std::move(svs), std::move(alphas), rho, options.nu, n);
  model.weights_.resize(dim, 0.0);
  model.support_indices_ = std::move(indices);
  return model;
}

FilterReport report_from_confusion(const std::array<std::array<std::size_t, 2>, 2>& confusion) {
  FilterReport r;
  r.confusion = confusion;
  auto metrics = [&](int c) {
    ClassMetrics m;
    const auto tp = static_cast<double>(confusion[c][c]);
    const auto predicted = static_cast<double>(confusion[0][c] + confusion[1][c]);
    m.support = confusion[c][0] + confusion[c][1];
    m.precision = predicted > 0 ? tp / predicted : 0.0;
    m.recall = m.support > 0 ? tp / static_cast<double>(m.support) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
  };
  r.inlier = metrics(0);
  r.outlier = metrics(1);
  r.macro_precision = 0.5 * (r.inlier.precision + r.outlier.precision);
  r.macro_recall = 0.5 * (r.inlier.recall + r.outlier.recall);
  r.macro_f1 = 0.5 * (r.inlier.f1 + r.outlier.f1);
  return r;
}

FilterReport evaluate_filter(const OneClassSvmModel& model, std::span<const SparseVector> inliers,
                             std::span<const SparseVector> outliers) {
  if (inliers.empty() || outliers.empty()) {
    throw InvalidArgument("evaluate_filter needs both inlier and outlier examples");
  }
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  for (const auto& v : inliers) ++confusion[0][model.is_inlier(v) ? 0 : 1];
  for (const auto& v : outliers) ++confusion[1][model.is_inlier(v) ? 0 : 1];
  return report_from_confusion(confusion);
}

}  // namespace nowcast
