#include <benchmark/benchmark.h>

#include <random>

#include "hwnas/decoder.hpp"
#include "hwnas/latency.hpp"
#include "hwnas/ops.hpp"
#include "hwnas/search_space.hpp"

using namespace hwnas;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(shape, std::move(v));
}

// Toy search space: 8x16x16 volumes, L=4, S=3, C0=4.
SearchConfig toy() {
  SearchConfig cfg;
  cfg.layers = 4;
  cfg.scales = 3;
  cfg.base_channels = 4;
  cfg.input_shape = {8, 16, 16};
  return cfg;
}

void randomize(ArchParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto t : p.tensors())
    for (auto& v : t.mutable_data()) v = n(rng);
}

// Primitive op on a [1, C, 8, 16, 16] volume; range(0) = channels.
void BM_Primitive(benchmark::State& state, PrimitiveOp op) {
  const auto c = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const OpWeights w = init_op_weights(op, c, c, rng);
  const Tensor x = random_tensor({1, c, 8, 16, 16}, 2);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(apply_primitive(op, x, w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.numel()));
}
BENCHMARK_CAPTURE(BM_Primitive, conv3d, PrimitiveOp::Conv3d)->Arg(4)->Arg(8)->Arg(16);
BENCHMARK_CAPTURE(BM_Primitive, dil_conv3d, PrimitiveOp::DilatedConv3d)->Arg(4)->Arg(8)->Arg(16);
BENCHMARK_CAPTURE(BM_Primitive, sep_conv3d, PrimitiveOp::SeparableConv3d)->Arg(4)->Arg(8)->Arg(16);
BENCHMARK_CAPTURE(BM_Primitive, maxpool3d, PrimitiveOp::MaxPool3d)->Arg(4)->Arg(8)->Arg(16);

void BM_Conv3dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({1, c, 8, 16, 16}, 3);
  Tensor w = random_tensor({c, c, 3, 3, 3}, 4);
  Tensor b = random_tensor({c}, 5);
  w.set_requires_grad(true);
  b.set_requires_grad(true);
  for (auto _ : state) {
    w.zero_grad();
    b.zero_grad();
    backward(sum(conv3d(x, w, b, {})));
  }
}
BENCHMARK(BM_Conv3dBackward)->Arg(4)->Arg(8);

void BM_SupernetForward(benchmark::State& state) {
  auto cfg = toy();
  cfg.k_partial = static_cast<int>(state.range(0));
  auto [net, params] = build_supernet(cfg, 6);
  const Tensor x = random_tensor({1, 1, 8, 16, 16}, 7);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(network_forward(net, x, params));
}
BENCHMARK(BM_SupernetForward)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_TopNPaths(benchmark::State& state) {
  SearchConfig cfg = toy();
  cfg.layers = static_cast<int>(state.range(0));
  cfg.scales = 4;
  cfg.input_shape = {16, 16, 16};
  auto params = ArchParams::zeros(cfg);
  randomize(params, 8);
  const BetaGrid grid = beta_grid(params, cfg);
  const int n = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(top_n_longest_paths(grid, n, true));
}
BENCHMARK(BM_TopNPaths)->Args({4, 1})->Args({12, 3})->Args({20, 3})->Args({20, 10});

void BM_ExpectedNetworkLatency(benchmark::State& state) {
  const auto cfg = toy();
  LatencyTable table;
  for (const auto& sig : required_signatures(cfg)) table.set(sig, 1e-4);
  auto params = ArchParams::zeros(cfg);
  randomize(params, 9);
  std::mt19937_64 rng(10);
  const auto noise = LatencyNoise::sample(cfg, rng);
  for (auto _ : state) {
    const auto lat = expected_network_latency(params, cfg, table, static_cast<int>(state.range(0)), 1.0, noise);
    backward(lat.total);
  }
}
BENCHMARK(BM_ExpectedNetworkLatency)->Arg(1)->Arg(2)->Arg(3);

void BM_DiscreteForward(benchmark::State& state) {
  const auto cfg = toy();
  auto params = ArchParams::zeros(cfg);
  randomize(params, 11);
  const DiscreteNetwork net(decode_arch(params, cfg, static_cast<int>(state.range(0))), 12);
  const Tensor x = random_tensor({1, 1, 8, 16, 16}, 13);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_DiscreteForward)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
