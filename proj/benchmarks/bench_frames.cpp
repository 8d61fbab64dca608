#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>

#include "kframe/frames.hpp"
#include "kframe/scenarios.hpp"

using namespace kframe;

namespace {

struct Fock {
  ContextPtr ctx;
  GridFunction theta;
  PointFamily lambda;
  std::vector<double> tau;
};

Fock fock(double atom_half) {
  const GroupSpec g = fock_group();
  auto span = std::make_shared<const KernelSpan>(fock_kernel(), square_lattice(g, 0.5, atom_half).points());
  auto disp = QuadratureGrid::centered(g, {7, 7}, {14, 14}, false);
  const PointFamily l = square_lattice(g, 0.6, 10.0);
  return {std::make_shared<const SpanContext>(span, disp), fock_envelope(disp), l,
          std::vector<double>(l.size(), 0.36 / M_PI)};
}

}  // namespace

static void BM_KernelSpan(benchmark::State& state) {
  const PointFamily atoms = square_lattice(fock_group(), 0.5, static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(KernelSpan(fock_kernel(), atoms.points()));
}
BENCHMARK(BM_KernelSpan)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_AlmostTightFrame(benchmark::State& state) {
  const Fock f = fock(3.0);
  for (auto _ : state) benchmark::DoNotOptimize(almost_tight_frame(f.ctx->span(), f.lambda, f.tau));
}
BENCHMARK(BM_AlmostTightFrame)->Unit(benchmark::kMillisecond);

static void BM_DualFrameMolecules(benchmark::State& state) {
  const Fock f = fock(3.0);
  for (auto _ : state) benchmark::DoNotOptimize(dual_frame_molecules(f.ctx, f.lambda, f.tau, f.theta));
}
BENCHMARK(BM_DualFrameMolecules)->Unit(benchmark::kMillisecond);

static void BM_HoloMatrixInverse(benchmark::State& state) {
  const GroupSpec g = fock_group();
  auto disp = QuadratureGrid::centered(g, {12, 12}, {24, 24}, false);
  const CDMatrix m = normalized_gramian(fock_kernel(), square_lattice(g, 4.0, static_cast<double>(state.range(0))),
                                        fock_envelope(disp));
  for (auto _ : state) benchmark::DoNotOptimize(holo_calculus_matrix(m, HoloSpec::inverse()));
}
BENCHMARK(BM_HoloMatrixInverse)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

static void BM_CDProduct(benchmark::State& state) {
  const GroupSpec g = fock_group();
  auto disp = QuadratureGrid::centered(g, {12, 12}, {24, 24}, false);
  const CDMatrix m = normalized_gramian(fock_kernel(), square_lattice(g, 4.0, 8.0), fock_envelope(disp));
  for (auto _ : state) benchmark::DoNotOptimize(cd_product(m, m));
}
BENCHMARK(BM_CDProduct)->Unit(benchmark::kMillisecond);
