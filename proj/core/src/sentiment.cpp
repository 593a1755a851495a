#include "nowcast/sentiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "csv.hpp"
#include "nowcast/error.hpp"

namespace nowcast {

using json = nlohmann::json;

double encode_label(Condition condition) {
  switch (condition) {
    case Condition::kVeryGood:
      return 2.0;
    case Condition::kGood:
      return 1.0;
    case Condition::kNeutral:
      return 0.0;
    case Condition::kBad:
      return -1.0;
    case Condition::kVeryBad:
      return -2.0;
  }
  return 0.0;
}

double encode_label(std::string_view symbol) {
  const auto c = parse_condition(symbol);
  if (!c) throw InvalidArgument("unknown condition symbol '" + std::string(symbol) + "'");
  return encode_label(*c);
}

RidgeModel::RidgeModel(std::vector<double> weights, double bias, double lambda)
    : weights_(std::move(weights)), bias_(bias), lambda_(lambda) {
  if (!(lambda_ > 0.0)) throw InvalidArgument("ridge lambda must be positive");
  for (double w : weights_) {
    if (!std::isfinite(w)) throw InvalidArgument("ridge weights must be finite");
  }
}

double RidgeModel::predict(const SparseVector& x) const {
  if (x.dim != weights_.size()) {
    throw InvalidArgument("feature dimension " + std::to_string(x.dim) +
                          " does not match model dimension " + std::to_string(weights_.size()));
  }
  return dot(x, weights_) + bias_;
}

std::string RidgeModel::to_json() const {
  json idx = json::array(), val = json::array();
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] != 0.0) {
      idx.push_back(i);
      val.push_back(weights_[i]);
    }
  }
  json j = {{"version", kVersion},
            {"lambda", lambda_},
            {"bias", bias_},
            {"weights", {{"dim", weights_.size()}, {"indices", idx}, {"values", val}}}};
  return j.dump();
}

RidgeModel RidgeModel::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("version").get<int>() != kVersion) {
      throw ParseError("unsupported ridge model version " + j.at("version").dump());
    }
    const auto& w = j.at("weights");
    std::vector<double> weights(w.at("dim").get<std::size_t>(), 0.0);
    const auto idx = w.at("indices").get<std::vector<std::size_t>>();
    const auto val = w.at("values").get<std::vector<double>>();
    if (idx.size() != val.size()) throw ParseError("ridge weight indices and values differ");
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] >= weights.size()) throw ParseError("ridge weight index out of range");
      weights[idx[k]] = val[k];
    }
    return RidgeModel(std::move(weights), j.at("bias").get<double>(), j.at("lambda").get<double>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid ridge model: ") + e.what());
  }
}

RidgeModel train_ridge(std::span<const SparseVector> x, std::span<const double> y,
                       const RidgeOptions& options) {
  if (x.size() != y.size()) {
    throw InvalidArgument("ridge: " + std::to_string(x.size()) + " rows but " +
                          std::to_string(y.size()) + " targets");
  }
  if (x.empty()) throw InvalidArgument("ridge: no training rows");
  if (!(options.lambda > 0.0)) throw InvalidArgument("ridge: lambda must be positive");
  const std::size_t dim = x[0].dim;
  for (const auto& row : x) {
    if (row.dim != dim) throw InvalidArgument("ridge: rows have inconsistent dimensions");
  }

  // Unknowns: [w (dim); b] with the bias slot pinned to zero when no intercept.
  const std::size_t m = dim + 1;
  const bool intercept = options.fit_intercept;
  const double lambda = options.lambda;
  const auto n = static_cast<double>(x.size());

  std::vector<double> residual_rows(x.size());
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    const std::span<const double> w(v.data(), dim);
    const double b = intercept ? v[dim] : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) residual_rows[i] = dot(x[i], w) + b;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t k = 0; k < x[i].nnz(); ++k) {
        out[x[i].indices[k]] += x[i].values[k] * residual_rows[i];
      }
    }
    for (std::size_t k = 0; k < dim; ++k) out[k] += lambda * v[k];
    out[dim] = intercept ? std::accumulate(residual_rows.begin(), residual_rows.end(), 0.0) : 0.0;
  };

  std::vector<double> rhs(m, 0.0), diag(m, lambda);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t k = 0; k < x[i].nnz(); ++k) {
      rhs[x[i].indices[k]] += x[i].values[k] * y[i];
      diag[x[i].indices[k]] += x[i].values[k] * x[i].values[k];
    }
  }
  rhs[dim] = intercept ? std::accumulate(y.begin(), y.end(), 0.0) : 0.0;
  diag[dim] = intercept ? n : 1.0;

  auto norm = [](const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  };
  const double rhs_norm = norm(rhs);
  std::vector<double> sol(m, 0.0);
  std::size_t iter = 0;
  double rel = 0.0;
  if (rhs_norm > 0.0) {
    std::vector<double> r = rhs, z(m), p(m), q(m);
    for (std::size_t k = 0; k < m; ++k) z[k] = r[k] / diag[k];
    p = z;
    double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const std::size_t cap = options.max_iterations ? options.max_iterations : 20 * m + 100;
    rel = norm(r) / rhs_norm;
    while (rel >= options.relative_tolerance) {
      if (iter >= cap) {
        throw ConvergenceError("ridge conjugate gradient stalled at relative residual " +
                                   std::to_string(rel),
                               rel);
      }
      ++iter;
      apply(p, q);
      const double pq = std::inner_product(p.begin(), p.end(), q.begin(), 0.0);
      if (!(pq > 0.0)) break;
      const double step = rz / pq;
      for (std::size_t k = 0; k < m; ++k) {
        sol[k] += step * p[k];
        r[k] -= step * q[k];
      }
      rel = norm(r) / rhs_norm;
      for (std::size_t k = 0; k < m; ++k) z[k] = r[k] / diag[k];
      const double rz_next = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t k = 0; k < m; ++k) p[k] = z[k] + beta * p[k];
    }
  }

  const double bias = intercept ? sol[dim] : 0.0;
  sol.resize(dim);
  RidgeModel model(std::move(sol), bias, lambda);
  model.iterations_ = iter;
  model.residual_ = rel;
  return model;
}

double mse(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size()) throw InvalidArgument("mse: length mismatch");
  if (pred.empty()) throw InvalidArgument("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gold[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

DataSplit split_for_training(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  const std::size_t n_dev = n - n_test;
  const auto n_valid = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n_dev)));
  DataSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_dev - n_valid));
  split.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_dev - n_valid),
                     order.begin() + static_cast<std::ptrdiff_t>(n_dev));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_dev), order.end());
  return split;
}

SentimentFit fit_sentiment(std::span<const SparseVector> x, std::span<const double> y,
                           std::span<const double> grid, std::uint64_t seed) {
  if (x.size() != y.size()) throw InvalidArgument("fit_sentiment: size mismatch");
  if (grid.empty()) throw InvalidArgument("fit_sentiment: empty lambda grid");
  const DataSplit split = split_for_training(x.size(), seed);
  if (split.train.empty() || split.valid.empty() || split.test.empty()) {
    throw InvalidArgument("fit_sentiment: need at least 20 labelled examples, got " +
                          std::to_string(x.size()));
  }
  auto gather = [&](const std::vector<std::size_t>& idx, std::vector<SparseVector>& xs,
                    std::vector<double>& ys) {
    for (auto i : idx) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  };
  auto predict_all = [](const RidgeModel& m, const std::vector<SparseVector>& xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto& v : xs) out.push_back(m.predict(v));
    return out;
  };

  std::vector<SparseVector> xtr, xva, xte;
  std::vector<double> ytr, yva, yte;
  gather(split.train, xtr, ytr);
  gather(split.valid, xva, yva);
  gather(split.test, xte, yte);

  SentimentFit fit;
  double best = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    RidgeOptions opt;
    opt.lambda = lambda;
    const RidgeModel m = train_ridge(xtr, ytr, opt);
    const double e = mse(predict_all(m, xva), yva);
    fit.report.validation_mse.emplace_back(lambda, e);
    if (e < best) {
      best = e;
      fit.report.lambda = lambda;
    }
  }

  xtr.insert(xtr.end(), xva.begin(), xva.end());
  ytr.insert(ytr.end(), yva.begin(), yva.end());
  RidgeOptions opt;
  opt.lambda = fit.report.lambda;
  fit.model = train_ridge(xtr, ytr, opt);
  fit.report.test_mse = mse(predict_all(fit.model, xte), yte);
  const double mean = std::accumulate(ytr.begin(), ytr.end(), 0.0) / static_cast<double>(ytr.size());
  fit.report.baseline_test_mse = mse(std::vector<double>(yte.size(), mean), yte);
  fit.report.n_train = split.train.size();
  fit.report.n_valid = split.valid.size();
  fit.report.n_test = split.test.size();
  return fit;
}

std::optional<double> ScoreTable::find(const std::string& id) const {
  const auto it = scores_.find(id);
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

ScoreLoadResult load_scores(std::istream& in) {
  ScoreLoadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected sentence_id<TAB>score", lineno);
    std::string id = line.substr(0, tab);
    const std::string_view text = detail::trim(std::string_view(line).substr(tab + 1));
    double score = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), score);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty() ||
        !std::isfinite(score)) {
      throw ParseError("unparseable score '" + std::string(text) + "'", lineno);
    }
    if (result.table.contains(id)) {
      result.warnings.push_back({lineno, "duplicate sentence id '" + id + "', last value wins"});
    }
    result.table.set(std::move(id), score);
  }
  return result;
}

}  // namespace nowcast
