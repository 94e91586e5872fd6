#include <benchmark/benchmark.h>

#include "tsdl/layers.hpp"
#include "tsdl/zoo.hpp"

using namespace tsdl;

namespace {

Tensor noise(Shape shape, std::uint64_t seed) { return make(std::move(shape), GaussianFill{0, 1, seed}); }

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = noise({n, n}, 1), b = noise({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256);

void BM_Conv1dForwardBackward(benchmark::State& state) {
  const auto time = static_cast<std::size_t>(state.range(0));
  Conv1d conv({.filters = 16, .kernel = 3});
  Rng rng(1);
  conv.configure_single({time, 8}, rng);
  const Tensor x = noise({32, time, 8}, 3);
  for (auto _ : state) {
    const Tensor y = conv.forward_single(x, Mode::train, true);
    benchmark::DoNotOptimize(conv.backward_single(make(y.shape(), real(1))));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Conv1dForwardBackward)->Arg(100)->Arg(1000);

void BM_LstmForwardBackward(benchmark::State& state) {
  const auto time = static_cast<std::size_t>(state.range(0));
  Lstm lstm({.units = 20});
  Rng rng(1);
  lstm.configure_single({time, 1}, rng);
  const Tensor x = noise({32, time, 1}, 4);
  for (auto _ : state) {
    const Tensor y = lstm.forward_single(x, Mode::train, true);
    benchmark::DoNotOptimize(lstm.backward_single(make(y.shape(), real(1))));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_LstmForwardBackward)->Arg(100)->Arg(1000);

void BM_ZooForward(benchmark::State& state, const char* name) {
  Model m = zoo::build_model(name, {1000, 1});
  m.set_mode(Mode::eval);
  const Tensor x = noise({8, 1000, 1}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK_CAPTURE(BM_ZooForward, example, "ExampleModel");
BENCHMARK_CAPTURE(BM_ZooForward, oh_shu_lih, "OhShuLih");

}  // namespace
BENCHMARK_MAIN();
