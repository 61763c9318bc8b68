#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fsml/episode_sampler.hpp"
#include "fsml/fusion.hpp"
#include "fsml/metrics.hpp"
#include "fsml/synthetic.hpp"
#include "fsml/transductive.hpp"

namespace {

const fsml::EmbeddingStore& bench_store() {
  static const auto store = fsml::generate({.num_classes = 20, .dim = 64, .samples_per_class = 200,
                                            .lambda_lo = 0.5, .lambda_hi = 5.0, .seed = 3})
                                .first;
  return store;
}

void BM_MllScore(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::vector<double> lambda(dim);
  std::vector<double> query(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    lambda[i] = u(rng);
    query[i] = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(fsml::mll_score(lambda, query));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(dim));
}
BENCHMARK(BM_MllScore)->Arg(64)->Arg(640)->Arg(2048);

void BM_MvnCdf(benchmark::State& state) {
  const fsml::Vec3 x{0.1, 0.3, -0.4};
  const fsml::Vec3 mu{0.0, 0.0, 0.0};
  const fsml::Mat3 sigma{{{1.0, 0.5, 0.2}, {0.5, 2.0, 0.3}, {0.2, 0.3, 1.5}}};
  const auto points = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fsml::mvn_cdf(x, mu, sigma, points));
}
BENCHMARK(BM_MvnCdf)->Arg(1 << 10)->Arg(1 << 14);

void BM_InductiveEpisode(benchmark::State& state) {
  const fsml::EpisodeSampler sampler(bench_store(), 5, 1, 15);
  std::uint64_t e = 0;
  for (auto _ : state) {
    const auto ep = fsml::materialize(sampler.plan_balanced(15, 9, e++), bench_store());
    benchmark::DoNotOptimize(fsml::classify_inductive(ep.task, fsml::Metric::kMll, fsml::kEvalLambdaMax));
  }
}
BENCHMARK(BM_InductiveEpisode);

void BM_TransductiveEpisode(benchmark::State& state) {
  const fsml::EpisodeSampler sampler(bench_store(), 5, 1, 75);
  std::uint64_t e = 0;
  for (auto _ : state) {
    std::mt19937_64 rng(fsml::derive_seed(9, e, 1));
    const auto counts = fsml::dirichlet_query_counts(5, 75, 2.0, rng);
    const auto ep = fsml::materialize(sampler.plan(counts.per_class, 9, e++), bench_store());
    benchmark::DoNotOptimize(fsml::transductive_classify(ep.task, {}));
  }
}
BENCHMARK(BM_TransductiveEpisode);

}  // namespace

BENCHMARK_MAIN();
