#include <benchmark/benchmark.h>

#include "mmsc/aggregation.hpp"
#include "mmsc/image.hpp"
#include "mmsc/ops.hpp"
#include "mmsc/rng.hpp"
#include "mmsc/tissue.hpp"

using namespace mmsc;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = float(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int side = int(state.range(0));
  Rng rng(1);
  Tensor in = random_tensor({1, 8, side, side}, rng);
  Tensor ker = random_tensor({16, 8, 3, 3}, rng);
  Tensor bias = random_tensor({16}, rng);
  for (auto _ : state) {
    Graph g;
    Tensor out = conv2d(g, in, ker, bias, 1, 1);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t(side) * side * 8 * 16 * 9);
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64)->Arg(128);

void BM_ConvBackward(benchmark::State& state) {
  const int side = int(state.range(0));
  Rng rng(2);
  Tensor ker = random_tensor({8, 1, 3, 3}, rng);
  Tensor bias = random_tensor({8}, rng);
  ker.set_requires_grad(true);
  bias.set_requires_grad(true);
  Tensor in = random_tensor({1, 1, side, side}, rng);
  for (auto _ : state) {
    Graph g;
    Tensor out = conv2d(g, in, ker, bias, 1, 1);
    Tensor total = sum(g, out);
    ker.zero_grad();
    bias.zero_grad();
    g.backward(total);
    benchmark::DoNotOptimize(ker.grad().data());
  }
}
BENCHMARK(BM_ConvBackward)->Arg(32)->Arg(64);

void BM_Maxpool(benchmark::State& state) {
  Rng rng(3);
  Tensor in = random_tensor({1, 16, 128, 128}, rng);
  for (auto _ : state) {
    Graph g;
    Tensor out = maxpool2(g, in);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Maxpool);

void BM_PredictPatch(benchmark::State& state) {
  Rng rng(4);
  TissueNetConfig cfg;
  cfg.input_size = 32;
  cfg.conv_blocks = {{8, 1}, {16, 1}};
  cfg.dense_widths = {32};
  Network net = build_tissue_net(cfg, rng);
  Patch p;
  p.pixels = ImageF(32, 32);
  for (auto& v : p.pixels.data) v = float(rng.uniform(0.0, 1.0));
  for (auto _ : state) {
    double z = predict_patch(net, p);
    benchmark::DoNotOptimize(z);
  }
}
BENCHMARK(BM_PredictPatch);

void BM_AggregateLocal(benchmark::State& state) {
  const int threads = int(state.range(0));
  Rng rng(5);
  TissueNetConfig cfg;
  cfg.input_size = 32;
  cfg.conv_blocks = {{8, 1}, {16, 1}};
  cfg.dense_widths = {32};
  Network net = build_tissue_net(cfg, rng);
  ImageF scan(256, 256);
  for (auto& v : scan.data) v = float(rng.uniform(0.0, 1.0));
  for (auto _ : state) {
    AggregationGrid grid = aggregate_local(net, scan, 32, threads, 0.5);
    benchmark::DoNotOptimize(grid.values.data.data());
  }
}
BENCHMARK(BM_AggregateLocal)->Arg(1)->Arg(2)->Arg(4);

void BM_ResizeArea(benchmark::State& state) {
  Rng rng(6);
  ImageF img(2048, 2048);
  for (auto& v : img.data) v = float(rng.uniform(0.0, 1.0));
  for (auto _ : state) {
    ImageF out = resize_area(img, 676, 676);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_ResizeArea);

}  // namespace

BENCHMARK_MAIN();
