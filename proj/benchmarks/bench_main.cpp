#include <benchmark/benchmark.h>

#include "superedge/classical.hpp"
#include "superedge/evaluation.hpp"
#include "superedge/model.hpp"
#include "superedge/postprocess.hpp"
#include "superedge/synthetic.hpp"
#include "superedge/tensor.hpp"

using namespace superedge;

namespace {

SyntheticSample sample(int h, int w) {
  Rng rng = make_rng(7, {1, 0});
  return generate_sample(h, w, rng);
}

Tensor filled(Shape shape, float v) { return Tensor::full(std::move(shape), v); }

void BM_Conv2dForward(benchmark::State& state) {
  const auto c = state.range(0);
  const Tensor x = filled({1, c, 60, 80}, 0.5F), w = filled({c, c, 3, 3}, 0.01F), b = filled({c}, 0.0F);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1));
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = state.range(0);
  const Tensor x = filled({1, c, 60, 80}, 0.5F);
  Tensor w = Tensor::full({c, c, 3, 3}, 0.01F, true), b = Tensor::full({c}, 0.0F, true);
  for (auto _ : state) {
    backward(sum(conv2d(x, w, b, 1, 1)));
    w.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Canny(benchmark::State& state) {
  const Image img = sample(120, 160).image;
  for (auto _ : state) benchmark::DoNotOptimize(canny(img, CannyOptions{}));
}
BENCHMARK(BM_Canny)->Unit(benchmark::kMicrosecond);

void BM_L0Smooth(benchmark::State& state) {
  const Image img = sample(120, 160).image;
  for (auto _ : state) benchmark::DoNotOptimize(l0_smooth(img, 0.02F));
}
BENCHMARK(BM_L0Smooth)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const Image img = sample(120, 160).image;
  ModelParams params = ModelParams::create(0);
  for (auto _ : state) benchmark::DoNotOptimize(predict(img, params));
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

void BM_Fuse(benchmark::State& state) {
  Rng rng = make_rng(8, {0});
  std::uniform_real_distribution<float> u(0.0F, 1.0F);
  EdgeMap pix(120, 160), obj(120, 160);
  for (auto& v : pix.pixels()) v = u(rng) < 0.1F ? u(rng) : 0.0F;
  for (auto& v : obj.pixels()) v = u(rng) < 0.05F ? u(rng) : 0.0F;
  for (auto _ : state) benchmark::DoNotOptimize(fuse(pix, obj));
}
BENCHMARK(BM_Fuse)->Unit(benchmark::kMicrosecond);

void BM_EvaluateDataset(benchmark::State& state) {
  std::vector<EdgeMap> preds, gts;
  for (std::uint64_t i = 0; i < 10; ++i) {
    Rng rng = make_rng(9, {1, i});
    const SyntheticSample s = generate_sample(120, 160, rng);
    preds.push_back(canny(s.image, CannyOptions{}));
    gts.push_back(s.gt_edges);
  }
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_dataset(preds, gts));
}
BENCHMARK(BM_EvaluateDataset)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
