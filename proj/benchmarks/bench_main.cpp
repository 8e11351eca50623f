#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "saferep/adapt.hpp"
#include "saferep/belief.hpp"
#include "saferep/embed.hpp"
#include "saferep/trajdist.hpp"

using namespace saferep;

namespace {

std::vector<SystemState> random_traj(std::mt19937_64& rng, std::size_t len) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<SystemState> t(len);
  for (auto& s : t) {
    for (auto& v : s.x) v = g(rng);
  }
  return t;
}

void BM_DtwPair(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto a = random_traj(rng, len), b = random_traj(rng, len);
  const std::size_t band = (len + 9) / 10;
  for (auto _ : state) benchmark::DoNotOptimize(dtw_distance(a, b, band));
}
BENCHMARK(BM_DtwPair)->Arg(50)->Arg(200);

void BM_DistanceMatrix(benchmark::State& state) {
  std::mt19937_64 rng(2);
  Dataset ds;
  for (int i = 0; i < state.range(0); ++i) {
    RecoveryRecord r;
    r.trajectory = random_traj(rng, 50);
    r.x0 = r.trajectory.front();
    r.label = i % 2;
    ds.records.push_back(r);
  }
  const DtwOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(trajectory_distances(ds, opts).omega_max);
}
BENCHMARK(BM_DistanceMatrix)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_TsneIterations(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = u(rng);
  }
  EmbedConfig cfg;
  cfg.iters = 50;
  for (auto _ : state) benchmark::DoNotOptimize(tsne_embed(d, n, cfg).points.data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.iters));
}
BENCHMARK(BM_TsneIterations)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_WbfFuse(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<Bba> set(static_cast<std::size_t>(state.range(0)));
  for (auto& b : set) {
    const double mu = u(rng);
    b = {1.0 - mu, 0.0, mu};
  }
  for (auto _ : state) benchmark::DoNotOptimize(wbf_fuse(set));
}
BENCHMARK(BM_WbfFuse)->Arg(2)->Arg(20)->Arg(200);

void BM_GprFitPredict(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<AgreementSample> s;
  std::vector<SystemState> xs;
  for (std::size_t i = 0; i < n; ++i) {
    s.push_back({random_traj(rng, 1)[0], static_cast<double>(rng() % 2)});
    xs.push_back(s.back().x);
  }
  const auto probes = random_traj(rng, 2000);
  const Standardizer st = Standardizer::fit(xs);
  for (auto _ : state) {
    const GprModel m = gpr_fit(s, GprKernel{}, st);
    double acc = 0.0;
    for (const auto& x : probes) acc += gpr_predict(m, x).mean;
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_GprFitPredict)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
