#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "nowcast/contribution.hpp"
#include "nowcast/corpus.hpp"
#include "nowcast/dfm.hpp"
#include "nowcast/kalman.hpp"
#include "nowcast/outlier.hpp"
#include "nowcast/sentiment.hpp"
#include "nowcast/synthetic.hpp"
#include "nowcast/vectorize.hpp"

namespace {

using namespace nowcast;

std::vector<SparseVector> random_unit_vectors(std::size_t count, std::size_t dim, double density,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SparseVector> out;
  while (out.size() < count) {
    std::vector<std::pair<std::uint32_t, double>> pairs;
    for (std::size_t j = 0; j < dim; ++j) {
      if (unit(rng) < density) pairs.emplace_back(static_cast<std::uint32_t>(j), 0.05 + unit(rng));
    }
    auto v = SparseVector::from_pairs(std::move(pairs), dim);
    if (v.empty()) continue;
    out.push_back(scaled(v, 1.0 / std::sqrt(v.squared_norm())));
  }
  return out;
}

std::string sample_text() {
  return "東京五輪の開催を控えて客足が伸びている。 Sales rose 3.5 percent as the tax increase "
         "loomed. 消費税率の引き上げ前の駆け込み需要が見られた。";
}

void BM_Tokenize(benchmark::State& state) {
  const std::string text = sample_text();
  for (auto _ : state) benchmark::DoNotOptimize(tokenize(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Tokenize);

void BM_SegmentCorpus(benchmark::State& state) {
  SyntheticConfig config;
  config.months = 12;
  const auto data = generate_synthetic(config);
  const BigramTokenizer tokenizer;
  for (auto _ : state) benchmark::DoNotOptimize(segment_corpus(data.corpus, tokenizer));
  state.counters["docs"] = static_cast<double>(data.corpus.size());
}
BENCHMARK(BM_SegmentCorpus)->Unit(benchmark::kMillisecond);

void BM_TrainOcsvm(benchmark::State& state) {
  const auto data = random_unit_vectors(static_cast<std::size_t>(state.range(0)), 500, 0.02, 1);
  for (auto _ : state) benchmark::DoNotOptimize(train_ocsvm(data, {.nu = 0.1}));
}
BENCHMARK(BM_TrainOcsvm)->Arg(500)->Arg(2000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_TrainRidge(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto data = random_unit_vectors(n, 2000, 0.005, 2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> y(n);
  for (auto& v : y) v = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(train_ridge(data, y, {.lambda = 1.0}));
}
BENCHMARK(BM_TrainRidge)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_KalmanLoglik(benchmark::State& state) {
  DfmSpec spec;
  spec.p = 2;
  spec.q = 2;
  const auto n = static_cast<Eigen::Index>(state.range(0));
  spec.beta0 = Eigen::VectorXd::Zero(n);
  spec.gamma = Eigen::VectorXd::Constant(n, 0.8);
  spec.phi = Eigen::Vector2d(0.5, 0.2);
  spec.d = Eigen::MatrixXd::Constant(n, 2, 0.2);
  spec.var_eta = 1.0;
  spec.var_eps = Eigen::VectorXd::Ones(n);
  const auto model = build_state_space(spec);
  const auto sim = simulate_dfm(spec, 300, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kalman_loglik(model, sim.y));
}
BENCHMARK(BM_KalmanLoglik)->Arg(4)->Arg(12)->Unit(benchmark::kMicrosecond);

void BM_AttentionRollout(benchmark::State& state) {
  const std::size_t n = 64;
  AttentionStack stack{12, 12, n, std::vector<double>(12 * 12 * n * n, 1.0 / static_cast<double>(n))};
  for (auto _ : state) benchmark::DoNotOptimize(attention_rollout(stack));
}
BENCHMARK(BM_AttentionRollout)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
