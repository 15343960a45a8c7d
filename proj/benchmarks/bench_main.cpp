// Microbenchmarks for the hot paths: convolution, projector, one block step,
// and one TV reconstruction.

#include <benchmark/benchmark.h>

#include "bdgd/baselines/tv.hpp"
#include "bdgd/model/cascade.hpp"
#include "bdgd/ndgrad/ops.hpp"
#include "bdgd/phantoms/dataset.hpp"
#include "bdgd/tomo/radon.hpp"

using namespace bdgd;
namespace nd = bdgd::ndgrad;

namespace {

nd::Tensor random_tensor(nd::Shape shape, Rng& rng, bool grad = false) {
  std::vector<float> v(std::size_t(nd::numel(shape)));
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return nd::Tensor::from(shape, std::move(v), grad);
}

void conv_forward_backward(benchmark::State& state) {
  const int size = int(state.range(0)), channels = int(state.range(1));
  Rng rng(1);
  auto x = random_tensor({16, channels, size, size}, rng);
  auto w = random_tensor({channels, channels, 3, 3}, rng, true);
  auto b = random_tensor({channels}, rng, true);
  for (auto _ : state) {
    auto y = nd::sum(nd::conv2d(x, w, b, 1));
    y.backward();
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(conv_forward_backward)->Args({64, 8})->Args({64, 16})->Args({128, 16})->Unit(benchmark::kMillisecond);

void radon_forward(benchmark::State& state) {
  const int size = int(state.range(0));
  const auto g = tomo::make_geometry(tomo::ViewMode::sparse, 30, 0.0, size);
  Rng rng(2);
  const Image x = phantoms::random_ellipse_phantom(size, rng);
  for (auto _ : state) benchmark::DoNotOptimize(tomo::radon_forward(x, g));
}
BENCHMARK(radon_forward)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void back_project(benchmark::State& state) {
  const int size = int(state.range(0));
  const auto g = tomo::make_geometry(tomo::ViewMode::sparse, 30, 0.0, size);
  Rng rng(3);
  const auto y = tomo::radon_forward(phantoms::random_ellipse_phantom(size, rng), g);
  for (auto _ : state) benchmark::DoNotOptimize(tomo::back_project(y, g));
}
BENCHMARK(back_project)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void block_step(benchmark::State& state) {
  const int size = int(state.range(0));
  const auto g = tomo::make_geometry(tomo::ViewMode::sparse, 30, 0.0, size);
  const auto record = phantoms::make_record(0, g, 0.01, 4);
  const auto config = model::BlockConfig::desk();
  Rng rng(5);
  const auto block = model::init_block(config, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        model::block_step(record.x0, record.sinogram, block, config, g, rng, model::Sampling::weight_draw));
}
BENCHMARK(block_step)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void tv_reconstruct(benchmark::State& state) {
  const auto g = tomo::make_geometry(tomo::ViewMode::sparse, 30, 0.0, 64);
  const auto record = phantoms::make_record(0, g, 0.01, 6);
  const auto config = baselines::TVConfig::for_geometry(g, 0.01, int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(baselines::tv_reconstruct(record.sinogram, g, config));
}
BENCHMARK(tv_reconstruct)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
