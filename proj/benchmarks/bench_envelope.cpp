#include <benchmark/benchmark.h>

#include "kframe/envelope.hpp"
#include "kframe/pointset.hpp"
#include "kframe/scenarios.hpp"

using namespace kframe;

static void BM_MaximalLeft(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  auto disp = QuadratureGrid::centered(fock_group(), {7, 7}, {n, n}, false);
  const GridFunction f = fock_envelope(disp);
  for (auto _ : state) benchmark::DoNotOptimize(maximal_left(f));
  state.SetComplexityN(static_cast<long>(disp->size()));
}
BENCHMARK(BM_MaximalLeft)->Arg(14)->Arg(28)->Arg(56);

static void BM_Convolve(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  auto disp = QuadratureGrid::centered(fock_group(), {7, 7}, {n, n}, false);
  const GridFunction f = fock_envelope(disp);
  for (auto _ : state) benchmark::DoNotOptimize(convolve(f, f));
}
BENCHMARK(BM_Convolve)->Arg(14)->Arg(28);

static void BM_AmalgamAffine(benchmark::State& state) {
  const WaveletSpec ws = wavelet_spec(MotherWavelet::MexicanHat);
  auto disp = QuadratureGrid::centered(affine_positive_group(), {8, 5}, {32, 20}, false);
  const GridFunction f = wavelet_envelope(ws, disp);
  for (auto _ : state) benchmark::DoNotOptimize(amalgam_norms(f, Weight::constant()));
}
BENCHMARK(BM_AmalgamAffine);

static void BM_NearUniformSet(benchmark::State& state) {
  const GroupSpec g = fock_group();
  auto grid = QuadratureGrid::make(g, Window{{-5, -5}, {5, 5}}, {150, 150});
  const Neighborhood u = Neighborhood::box({-12, -12}, {12, 12}, Edges::HalfOpen);
  for (auto _ : state) benchmark::DoNotOptimize(near_uniform_set(u, 0.05, grid));
}
BENCHMARK(BM_NearUniformSet)->Unit(benchmark::kMillisecond);

static void BM_LatticeUniformity(benchmark::State& state) {
  const GroupSpec g = fock_group();
  const PointFamily l = square_lattice(g, 0.6, 10.0);
  auto grid = QuadratureGrid::make(g, Window{{-9.9, -9.9}, {9.9, 9.9}}, {66, 66});
  const Neighborhood cell = square_cell(g, 0.6);
  for (auto _ : state) benchmark::DoNotOptimize(uniformity(l, cell, grid, 6));
}
BENCHMARK(BM_LatticeUniformity)->Unit(benchmark::kMillisecond);
