#include "generators.hpp"

#include <cmath>
#include <utility>

namespace gen {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

nowcast::SparseVector sparse(Rng& rng, std::size_t dim, double density, bool positive,
                             bool normalize) {
  std::vector<std::pair<std::uint32_t, double>> pairs;
  for (std::size_t j = 0; j < dim; ++j) {
    if (uniform(rng, 0.0, 1.0) < density) {
      double v = positive ? uniform(rng, 0.05, 1.0) : uniform(rng, -1.0, 1.0);
      if (v == 0.0) v = 0.5;
      pairs.emplace_back(static_cast<std::uint32_t>(j), v);
    }
  }
  auto out = nowcast::SparseVector::from_pairs(std::move(pairs), dim);
  if (normalize && !out.empty()) out = nowcast::scaled(out, 1.0 / std::sqrt(out.squared_norm()));
  return out;
}

MatrixXd dense(Rng& rng, Index rows, Index cols) {
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

VectorXd stationary_ar(Rng& rng, std::size_t k) {
  VectorXd partial(static_cast<Index>(k));
  for (Index j = 0; j < partial.size(); ++j) partial(j) = uniform(rng, -0.9, 0.9);
  return nowcast::ar_from_partial(partial);
}

nowcast::DfmSpec dfm_spec(Rng& rng, std::size_t n, std::size_t p, std::size_t q) {
  nowcast::DfmSpec s;
  s.p = p;
  s.q = q;
  const auto ni = static_cast<Index>(n);
  s.beta0.resize(ni);
  s.gamma.resize(ni);
  s.var_eps.resize(ni);
  s.d.resize(ni, static_cast<Index>(q));
  for (Index i = 0; i < ni; ++i) {
    s.beta0(i) = uniform(rng, -2.0, 2.0);
    s.gamma(i) = uniform(rng, 0.3, 1.5) * (uniform(rng, 0.0, 1.0) < 0.8 ? 1.0 : -1.0);
    s.var_eps(i) = uniform(rng, 0.2, 1.5);
    if (q > 0) s.d.row(i) = stationary_ar(rng, q).transpose();
  }
  s.phi = stationary_ar(rng, p);
  s.var_eta = uniform(rng, 0.5, 1.5);
  return s;
}

nowcast::StateSpaceModel state_space(Rng& rng, Index m, Index n) {
  nowcast::StateSpaceModel model;
  MatrixXd t = dense(rng, m, m);
  Eigen::EigenSolver<MatrixXd> es(t, false);
  const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
  model.transition = t * (uniform(rng, 0.2, 0.95) / std::max(radius, 1e-9));
  const Index r = m;
  model.selection = dense(rng, m, r);
  const MatrixXd lq = dense(rng, r, r);
  model.state_cov = lq * lq.transpose() / static_cast<double>(r) + 0.1 * MatrixXd::Identity(r, r);
  model.loading = dense(rng, n, m);
  model.intercept = dense(rng, n, 1);
  const MatrixXd lh = dense(rng, n, n);
  model.obs_cov = lh * lh.transpose() / static_cast<double>(n) + 0.1 * MatrixXd::Identity(n, n);
  model.initial_state = dense(rng, m, 1);
  model.initial_cov = nowcast::solve_discrete_lyapunov(
      model.transition, model.selection * model.state_cov * model.selection.transpose());
  return model;
}

nowcast::AttentionStack attention(Rng& rng, std::size_t layers, std::size_t heads, std::size_t n) {
  nowcast::AttentionStack stack;
  stack.layers = layers;
  stack.heads = heads;
  stack.size = n;
  stack.data.resize(layers * heads * n * n);
  for (std::size_t row = 0; row < layers * heads * n; ++row) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = std::exp(2.0 * normal(rng));
      stack.data[row * n + j] = v;
      sum += v;
    }
    for (std::size_t j = 0; j < n; ++j) stack.data[row * n + j] /= sum;
  }
  return stack;
}

std::vector<std::string> tokens(Rng& rng, std::size_t length, std::size_t alphabet) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < length; ++k) {
    out.push_back(std::string(1, static_cast<char>('a' + index(rng, 0, alphabet - 1))));
  }
  return out;
}

std::vector<nowcast::ScoredSentence> scored_sentences(Rng& rng, std::size_t count,
                                                      std::size_t months, std::size_t alphabet) {
  std::vector<nowcast::ScoredSentence> out;
  for (std::size_t k = 0; k < count; ++k) {
    nowcast::ScoredSentence s;
    s.sentence.id = "d" + std::to_string(k) + ":0";
    s.sentence.doc_id = "d" + std::to_string(k);
    s.sentence.date = nowcast::Date{2020, static_cast<unsigned>(1 + index(rng, 0, months - 1)),
                                    static_cast<unsigned>(1 + index(rng, 0, 27))};
    s.sentence.tokens = tokens(rng, index(rng, 1, 9), alphabet);
    for (const auto& t : s.sentence.tokens) s.sentence.text += t + " ";
    s.score = uniform(rng, -2.5, 2.5);
    s.decision = uniform(rng, -1.0, 1.0);
    s.inlier = *s.decision >= 0.0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace gen
