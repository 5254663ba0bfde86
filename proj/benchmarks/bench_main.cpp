#include <benchmark/benchmark.h>

#include "mhaff/model.hpp"
#include "mhaff/nn/ops.hpp"
#include "mhaff/phantom.hpp"
#include "mhaff/preprocess.hpp"
#include "mhaff/radiomics.hpp"
#include "mhaff/random.hpp"

using namespace mhaff;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto side = static_cast<std::size_t>(state.range(1));
  const auto x = noise(7 * c * side * side, 1), k = noise(c * c * 9, 2);
  for (auto _ : state) {
    nn::Graph<float> g;
    auto y = nn::conv2d(g.constant({7, c, side, side}, x), g.constant({c, c, 3, 3}, k));
    benchmark::DoNotOptimize(y.value().data());
  }
}
BENCHMARK(BM_Conv2dForward)->Args({8, 32})->Args({16, 32})->Args({16, 64});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto side = static_cast<std::size_t>(state.range(1));
  const auto x = noise(7 * c * side * side, 1), k = noise(c * c * 9, 2);
  for (auto _ : state) {
    nn::Graph<float> g;
    auto w = g.parameter({c, c, 3, 3}, k);
    auto loss = nn::sum(nn::conv2d(g.constant({7, c, side, side}, x), w));
    g.backward(loss);
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 32})->Args({16, 32});

radiomics::QuantizedRegion nodule_region() {
  const auto c = phantom::gen_case(phantom::plan_dataset({1, 3, 42})[2]);
  return radiomics::quantize(radiomics::region_from_mask(c.hu, c.mask));
}

void BM_Glcm(benchmark::State& state) {
  const auto q = nodule_region();
  for (auto _ : state) benchmark::DoNotOptimize(radiomics::glcm_features(q));
}
BENCHMARK(BM_Glcm);

void BM_Glrlm(benchmark::State& state) {
  const auto q = nodule_region();
  for (auto _ : state) benchmark::DoNotOptimize(radiomics::glrlm_features(q));
}
BENCHMARK(BM_Glrlm);

void BM_Glszm(benchmark::State& state) {
  const auto q = nodule_region();
  for (auto _ : state) benchmark::DoNotOptimize(radiomics::glszm_features(q));
}
BENCHMARK(BM_Glszm);

void BM_ExtractAll(benchmark::State& state) {
  const auto plan = phantom::plan_dataset({1, 3, 42});
  const auto c = phantom::gen_case(plan[0]);
  const NoduleAnnotation ann{plan[0].patient_id, "", c.center, plan[0].label};
  const auto lung = preprocess::compute_lung_mask(c.hu);
  for (auto _ : state) benchmark::DoNotOptimize(radiomics::extract_all(c.hu, ann, lung));
}
BENCHMARK(BM_ExtractAll)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  model::ModelConfig cfg;
  cfg.radiomics_dim = 70;
  const auto params = model::init_params<float>(cfg, 1);
  model::ModelInput in;
  in.radiomics = noise(cfg.radiomics_dim, 3);
  in.image = noise(cfg.n * cfg.roi_side * cfg.roi_side, 4);
  for (auto _ : state) benchmark::DoNotOptimize(model::predict(cfg, params, in));
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
