// Serial reference vs OpenMP kernels.
//
//   bench_kernels --benchmark_filter=conv
//   ADALASE_THREADS=4 bench_kernels

#include <benchmark/benchmark.h>

#include <cstdlib>
#include <vector>

#include "adalase/kernels.hpp"
#include "adalase/rng.hpp"

namespace k = adalase::kernels;

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  adalase::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <bool Parallel>
void BM_dense_forward(benchmark::State& state) {
  const k::DenseGeometry g{64, static_cast<std::size_t>(state.range(0)),
                           static_cast<std::size_t>(state.range(0))};
  const auto in = filled(g.batch * g.in, 1), w = filled(g.out * g.in, 2), b = filled(g.out, 3);
  std::vector<double> out(g.batch * g.out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::dense_forward(g, in, w, b, out);
    } else {
      k::serial::dense_forward(g, in, w, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(g.batch * g.in * g.out));
}

template <bool Parallel>
void BM_dense_backward(benchmark::State& state) {
  const k::DenseGeometry g{64, static_cast<std::size_t>(state.range(0)),
                           static_cast<std::size_t>(state.range(0))};
  const auto in = filled(g.batch * g.in, 1), w = filled(g.out * g.in, 2),
             go = filled(g.batch * g.out, 3);
  std::vector<double> gi(in.size()), gw(w.size()), gb(g.out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::dense_backward(g, in, w, go, gi, gw, gb);
    } else {
      k::serial::dense_backward(g, in, w, go, gi, gw, gb);
    }
    benchmark::DoNotOptimize(gw.data());
  }
}

k::ConvGeometry conv_geometry(std::size_t channels) {
  k::ConvGeometry g;
  g.batch = 32;
  g.in_channels = channels;
  g.out_channels = channels;
  g.height = 16;
  g.width = 16;
  return g;
}

template <bool Parallel>
void BM_conv_forward(benchmark::State& state) {
  const auto g = conv_geometry(static_cast<std::size_t>(state.range(0)));
  const auto in = filled(g.batch * g.in_channels * g.height * g.width, 1);
  const auto w = filled(g.out_channels * g.in_channels * 9, 2), b = filled(g.out_channels, 3);
  std::vector<double> out(g.batch * g.out_channels * g.out_height() * g.out_width());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::conv2d_forward(g, in, w, b, out);
    } else {
      k::serial::conv2d_forward(g, in, w, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_conv_backward(benchmark::State& state) {
  const auto g = conv_geometry(static_cast<std::size_t>(state.range(0)));
  const auto in = filled(g.batch * g.in_channels * g.height * g.width, 1);
  const auto w = filled(g.out_channels * g.in_channels * 9, 2);
  const auto go = filled(g.batch * g.out_channels * g.out_height() * g.out_width(), 3);
  std::vector<double> gi(in.size()), gw(w.size()), gb(g.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::conv2d_backward(g, in, w, go, gi, gw, gb);
    } else {
      k::serial::conv2d_backward(g, in, w, go, gi, gw, gb);
    }
    benchmark::DoNotOptimize(gi.data());
  }
}

template <bool Parallel>
void BM_maxpool(benchmark::State& state) {
  const k::PoolGeometry g{32, static_cast<std::size_t>(state.range(0)), 16, 16};
  const auto in = filled(g.batch * g.channels * g.height * g.width, 1);
  std::vector<double> out(g.batch * g.channels * 64), gi(in.size());
  std::vector<std::size_t> arg(out.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::maxpool2_forward(g, in, out, arg);
      k::parallel::maxpool2_backward(g, out, arg, gi);
    } else {
      k::serial::maxpool2_forward(g, in, out, arg);
      k::serial::maxpool2_backward(g, out, arg, gi);
    }
    benchmark::DoNotOptimize(gi.data());
  }
}

}  // namespace

BENCHMARK(BM_dense_forward<false>)->Name("dense_forward/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_dense_forward<true>)->Name("dense_forward/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_dense_backward<false>)->Name("dense_backward/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_dense_backward<true>)->Name("dense_backward/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_conv_forward<false>)->Name("conv_forward/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_conv_forward<true>)->Name("conv_forward/parallel")->Arg(8)->Arg(32);
BENCHMARK(BM_conv_backward<false>)->Name("conv_backward/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_conv_backward<true>)->Name("conv_backward/parallel")->Arg(8)->Arg(32);
BENCHMARK(BM_maxpool<false>)->Name("maxpool/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_maxpool<true>)->Name("maxpool/parallel")->Arg(8)->Arg(32);

int main(int argc, char** argv) {
  if (const char* env = std::getenv("ADALASE_THREADS")) k::set_max_threads(std::atoi(env));
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
