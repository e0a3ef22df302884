#include <benchmark/benchmark.h>

#include <vector>

#include "irisnet/data.hpp"
#include "irisnet/gemm.hpp"
#include "irisnet/loss.hpp"
#include "irisnet/model.hpp"
#include "irisnet/nn.hpp"
#include "irisnet/ops.hpp"
#include "irisnet/optim.hpp"
#include "irisnet/random.hpp"

using namespace irisnet;

namespace {

Tensor uniform(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return Tensor(shape, std::move(v));
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = uniform({n, n}, 1), b = uniform({n, n}, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    detail::gemm(false, false, n, n, n, a.data().data(), b.data().data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(128)->Arg(256);

void BM_Conv3x3Forward(benchmark::State& state) {
  const auto ch = static_cast<std::size_t>(state.range(0));
  const Tensor x = uniform({8, ch, 32, 32}, 3), w = uniform({ch, ch, 3, 3}, 4);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, Conv2dParams{w, {}, 1, 1}));
}
BENCHMARK(BM_Conv3x3Forward)->Arg(8)->Arg(16)->Arg(32);

void BM_Conv3x3Backward(benchmark::State& state) {
  const auto ch = static_cast<std::size_t>(state.range(0));
  const Tensor x = uniform({8, ch, 32, 32}, 5);
  for (auto _ : state) {
    Tensor w = uniform({ch, ch, 3, 3}, 6).set_requires_grad(true);
    sum(conv2d(x, Conv2dParams{w, {}, 1, 1})).backward();
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_Conv3x3Backward)->Arg(8)->Arg(16)->Arg(32);

// One Adam step of resnet_micro on a batch of eight 32x32 images.
void BM_TrainStep(benchmark::State& state) {
  Model model = build(resnet_micro_spec(20), 7);
  const Tensor images = uniform({8, 3, 32, 32}, 8);
  const std::vector<std::size_t> labels{0, 1, 2, 3, 4, 5, 6, 7};
  const NamedTensors params = trainable_parameters(model);
  AdamState adam;
  for (auto _ : state) {
    zero_grads(params);
    Tensor loss = final_loss(model.forward(images, true), std::span<const std::size_t>(labels), model.head_weight(),
                             1e-4f);
    loss.backward();
    adam_step(params, adam, AdamConfig{});
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Infer(benchmark::State& state) {
  const Model model = build(resnet_micro_spec(20), 9);
  const Tensor images = uniform({32, 3, 32, 32}, 10);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(images));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Infer)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
