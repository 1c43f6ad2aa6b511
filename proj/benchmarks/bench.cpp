#include <benchmark/benchmark.h>

#include "cp/dcscores.hpp"
#include "cp/diffusion.hpp"
#include "cp/metrics.hpp"
#include "cp/model.hpp"
#include "cp/rng.hpp"

namespace {

cp::DenoiserModel make_model(int concepts) {
  cp::Rng rng(7);
  cp::DenoiserModel m(cp::DenoiserModel::Dims{}, concepts, rng);
  m.set_num_seen_concepts(concepts);
  return m;
}

void BM_ForwardBackward(benchmark::State& state) {
  cp::Rng rng(11);
  auto model = make_model(3);
  const auto schedule = cp::make_schedule(100, 1e-4, 0.02);
  const cp::Tensor x0({2}, {0.3, -0.8});
  for (auto _ : state) {
    cp::Tensor loss = cp::denoise_loss(model, x0, 1, schedule, rng);
    model.zero_grads();
    cp::backward(loss);
    benchmark::DoNotOptimize(loss.values()[0]);
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_Sample100Steps(benchmark::State& state) {
  auto model = make_model(2);
  const auto schedule = cp::make_schedule(100, 1e-4, 0.02);
  for (auto _ : state) {
    auto s = cp::sample(model, 1, 4, schedule, 42);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_Sample100Steps);

void BM_GetDcs(benchmark::State& state) {
  cp::Rng rng(13);
  auto model = make_model(4);
  const auto schedule = cp::make_schedule(100, 1e-4, 0.02);
  const cp::Tensor x0({2}, {0.3, -0.8});
  const cp::Tensor eps({2}, {0.5, -0.2});
  const cp::Tensor x_t = cp::forward_noise(x0, 50, eps, schedule);
  const cp::ConceptSubset subset = cp::sample_subset(4, 5, rng);
  for (auto _ : state) {
    auto r = cp::get_dcs(4, eps, model, 50, x_t, subset, 1.0);
    benchmark::DoNotOptimize(r.all_scores);
  }
}
BENCHMARK(BM_GetDcs);

void BM_Mmd2(benchmark::State& state) {
  cp::Rng rng(17);
  cp::SampleSet X(400, std::vector<double>(2)), Y(400, std::vector<double>(2));
  for (auto& p : X) { p[0] = rng.normal(); p[1] = rng.normal(); }
  for (auto& p : Y) { p[0] = rng.normal() + 1; p[1] = rng.normal(); }
  for (auto _ : state) {
    benchmark::DoNotOptimize(cp::mmd2(X, Y));
  }
}
BENCHMARK(BM_Mmd2);

}  // namespace

BENCHMARK_MAIN();
