// Serial reference kernels against the OpenMP kernels on the reference
// network's layer shapes, plus one full training step.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "hep2/kernels.hpp"
#include "hep2/network.hpp"

using namespace hep2;
using kernels::ConvShape;

namespace {

const ConvShape kShapes[] = {{1, 6, 78, 78, 7}, {6, 16, 36, 36, 4}, {16, 32, 11, 11, 3}};

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

struct ConvBuffers {
  ConvShape s;
  std::vector<double> x, w, b, gy, y, gw, gb, gx;
  explicit ConvBuffers(const ConvShape& shape)
      : s(shape),
        x(random_vector(s.input_count(), 1)),
        w(random_vector(s.weight_count(), 2)),
        b(random_vector(s.out_maps, 3)),
        gy(random_vector(s.output_count(), 4)),
        y(s.output_count()),
        gw(s.weight_count()),
        gb(s.out_maps),
        gx(s.input_count()) {}
};

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  ConvBuffers c(kShapes[state.range(0)]);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::parallel::conv_forward(c.s, c.x, c.w, c.b, c.y);
    else kernels::serial::conv_forward(c.s, c.x, c.w, c.b, c.y);
    benchmark::DoNotOptimize(c.y.data());
  }
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  ConvBuffers c(kShapes[state.range(0)]);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::conv_backward_filters(c.s, c.x, c.gy, c.gw, c.gb);
      kernels::parallel::conv_backward_input(c.s, c.w, c.gy, c.gx);
    } else {
      kernels::serial::conv_backward_filters(c.s, c.x, c.gy, c.gw, c.gb);
      kernels::serial::conv_backward_input(c.s, c.w, c.gy, c.gx);
    }
    benchmark::DoNotOptimize(c.gx.data());
  }
}

template <bool Parallel>
void BM_Dense(benchmark::State& state) {
  const std::size_t in = 288, out = 150;
  const auto x = random_vector(in, 1), w = random_vector(in * out, 2), b = random_vector(out, 3),
             gy = random_vector(out, 4);
  std::vector<double> y(out), gw(in * out), gb(out), gx(in);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::dense_forward(in, out, x, w, b, y);
      kernels::parallel::dense_backward(in, out, x, w, gy, gw, gb, gx);
    } else {
      kernels::serial::dense_forward(in, out, x, w, b, y);
      kernels::serial::dense_backward(in, out, x, w, gy, gw, gb, gx);
    }
    benchmark::DoNotOptimize(gx.data());
  }
}

void BM_TrainingStep(benchmark::State& state) {
  const auto spec = NetworkSpec::reference();
  const auto params = init_params(spec, 1);
  const auto pixels = random_vector(78 * 78, 5);
  const Map2D img(78, 78, std::vector<double>(pixels));
  for (auto _ : state) {
    const auto trace = forward(params, spec, img);
    auto g = backward(trace, params, spec, std::size_t{2});
    benchmark::DoNotOptimize(g.layers.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->DenseRange(0, 2);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->DenseRange(0, 2);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/serial")->DenseRange(0, 2);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->DenseRange(0, 2);
BENCHMARK(BM_Dense<false>)->Name("dense_288x150/serial");
BENCHMARK(BM_Dense<true>)->Name("dense_288x150/parallel");
BENCHMARK(BM_TrainingStep)->Name("forward_backward/reference_net");

BENCHMARK_MAIN();
