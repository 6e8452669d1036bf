#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cloudlayer/flow.hpp"
#include "cloudlayer/mixtures.hpp"
#include "cloudlayer/pipeline.hpp"
#include "cloudlayer/synth.hpp"

using namespace cloudlayer;

static void BM_FitBeta(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::gamma_distribution<double> g1(8.0, 1.0), g2(3.0, 1.0);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = g1(rng), b = g2(rng);
    v[i] = i % 2 ? a / (a + b) : b / (a + b);
  }
  auto data = mixtures::single_component(v);
  mixtures::MixtureSpec spec;
  spec.clusters = 2;
  spec.components = {{{mixtures::Feature::BetaT}, mixtures::Family::Beta}};
  for (auto _ : state) benchmark::DoNotOptimize(mixtures::fit(data, spec, mixtures::FitOptions{}));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_FitBeta)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

static void BM_FitGaussian2d(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back((i % 2 ? 1.0 : -1.0) + 0.3 * z(rng));
    v.push_back(0.3 * z(rng));
  }
  auto data = mixtures::single_component(v, 2);
  mixtures::MixtureSpec spec;
  spec.clusters = 2;
  spec.components = {{{mixtures::Feature::U, mixtures::Feature::V}, mixtures::Family::Gaussian}};
  for (auto _ : state) benchmark::DoNotOptimize(mixtures::fit(data, spec, mixtures::FitOptions{}));
}
BENCHMARK(BM_FitGaussian2d)->Arg(4000)->Unit(benchmark::kMillisecond);

static void BM_WlkSolve(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t n = m * 4 / 3;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0, 20);
  flow::DerivativeStack d{RealGrid(m, n), RealGrid(m, n), RealGrid(m, n), 1.0};
  for (std::size_t k = 0; k < m * n; ++k) {
    d.ix[k] = z(rng);
    d.iy[k] = z(rng);
    d.it[k] = z(rng);
  }
  const std::vector<RealGrid> w(2, RealGrid(m, n, 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(flow::wlk_solve(d, w, flow::WlkConfig{}));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(m * n));
}
BENCHMARK(BM_WlkSolve)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

static void BM_ProcessFrame(benchmark::State& state) {
  auto spec = synth::default_spec(static_cast<std::size_t>(state.range(0)), 1);
  spec.frames = 2;
  const auto seq = synth::generate(spec);
  const pipeline::PipelineConfig cfg;
  for (auto _ : state) {
    auto st = hmm::initial_state(cfg.beta);
    benchmark::DoNotOptimize(pipeline::process_frame(seq.frames[0], seq.frames[1], st, cfg));
  }
}
BENCHMARK(BM_ProcessFrame)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
