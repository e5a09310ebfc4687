#include <random>

#include <benchmark/benchmark.h>

#include "shiftdiag/balance.hpp"
#include "shiftdiag/inference.hpp"
#include "shiftdiag/selectadj.hpp"
#include "shiftdiag/simulate.hpp"

namespace sd = shiftdiag;

namespace {

sd::MomentConstraintSet random_set(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  sd::Rng rng = sd::stream_rng(seed, 0);
  std::normal_distribution<double> g;
  sd::MomentConstraintSet s;
  s.features.resize(n, d);
  for (auto& v : s.features.reshaped()) v = g(rng);
  s.targets = s.features.colwise().mean().transpose();
  for (auto& v : s.targets) v += 0.2 * g(rng);
  for (Eigen::Index j = 0; j < d; ++j) s.labels.push_back("c" + std::to_string(j));
  return s;
}

void BM_EntropyBalance(benchmark::State& state) {
  const auto set = random_set(state.range(0), state.range(1), 7);
  for (auto _ : state) benchmark::DoNotOptimize(sd::solve_entropy_weights(set).weights.data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EntropyBalance)->Args({500, 4})->Args({2000, 4})->Args({2000, 12})->Args({20000, 8});

void BM_Jackknife(benchmark::State& state) {
  sd::DgpConfig c;
  sd::parse_setting("s2iii", c);
  c.n1 = static_cast<std::size_t>(state.range(0));
  c.sampling = sd::FixedN2{static_cast<std::size_t>(state.range(0))};
  const auto pair = sd::generate_pair(c, 0);
  const auto spec = sd::make_scenario(c).spec;
  sd::JackknifeOptions opts;
  opts.warm_start = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(sd::jackknife_covariance(pair.original, pair.replication, spec, opts));
}
BENCHMARK(BM_Jackknife)->Args({250, 1})->Args({500, 1})->Args({500, 0})->Unit(benchmark::kMillisecond);

void BM_TruncatedProb(benchmark::State& state) {
  Eigen::Matrix2d s;
  s << 1.0, 0.4, 0.4, 1.0;
  double t = -3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sd::truncated_prob(t, 0.5, 2.4, 1.96, s));
    t = t > 3.0 ? -3.0 : t + 1e-3;
  }
}
BENCHMARK(BM_TruncatedProb);

void BM_InvertCi(benchmark::State& state) {
  Eigen::Matrix2d s;
  s << 1.0, 0.4, 0.4, 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(sd::invert_ci(0.5, 2.4, 1.96, s, 0.10));
}
BENCHMARK(BM_InvertCi);

}  // namespace

BENCHMARK_MAIN();
