// SPDX-License-Identifier: Apache-2.0

// Timings for the inner loops: fiber assembly, the Hermitian eigensolve and
// a full band sweep.

#include <benchmark/benchmark.h>

#include "blochkit/bloch_spectrum.hpp"
#include "blochkit/coeff_field.hpp"
#include "blochkit/edge_model.hpp"
#include "blochkit/planewave.hpp"

using namespace blochkit;

namespace
{

FourierSeries TwoCosines()
{
  FourierSeries s(1, 2);
  s.At({0, 0}) = 1.0;
  s.At({1, 0}) = s.At({-1, 0}) = 0.15;
  s.At({2, 0}) = s.At({-2, 0}) = 0.4;
  return s;
}

void BM_AssembleLaminate(benchmark::State &state)
{
  const int k = static_cast<int>(state.range(0));
  const CoefficientField a = BuildLaminate1d({1.0, 4.0}, {0.5, 0.5}, 2 * k);
  const PlanewaveBasis b(1, k);
  const RVector eta = RVector::Constant(1, 0.21);
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(AssembleFiber(a, b, eta, FactorizationRule::Laurent).h.data());
  }
}
BENCHMARK(BM_AssembleLaminate)->Arg(16)->Arg(32)->Arg(64);

void BM_AssembleSeparable2d(benchmark::State &state)
{
  const int k = static_cast<int>(state.range(0));
  const CoefficientField a = BuildSeparable2d(TwoCosines());
  const PlanewaveBasis b(2, k);
  RVector eta(2);
  eta << 0.13, -0.29;
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(AssembleFiber(a, b, eta, FactorizationRule::Laurent).h.data());
  }
}
BENCHMARK(BM_AssembleSeparable2d)->Arg(3)->Arg(5)->Arg(7);

void BM_EigenFiber(benchmark::State &state)
{
  const int k = static_cast<int>(state.range(0));
  const CoefficientField a = BuildSeparable2d(TwoCosines());
  const PlanewaveBasis b(2, k);
  RVector eta(2);
  eta << 0.13, -0.29;
  const FiberMatrix f = AssembleFiber(a, b, eta, FactorizationRule::Laurent);
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(EigenFiber(f, 8).values.data());
  }
}
BENCHMARK(BM_EigenFiber)->Arg(3)->Arg(5)->Arg(7);

void BM_BandSweepLaminate(benchmark::State &state)
{
  const CoefficientField a = BuildLaminate1d({1.0, 4.0}, {0.5, 0.5}, 48);
  const PlanewaveBasis b(1, 24);
  const BrillouinGrid g(1, static_cast<int>(state.range(0)));
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(ComputeBands(a, b, g, 6).values.data());
  }
}
BENCHMARK(BM_BandSweepLaminate)->Arg(33)->Arg(129)->Unit(benchmark::kMillisecond);

void BM_EdgeHessian(benchmark::State &state)
{
  const CoefficientField a = BuildLaminate1d({1.0, 4.0}, {0.5, 0.5}, 48);
  const BandEvaluator band2 = MakeBandEvaluator(a, PlanewaveBasis(1, 24), 2);
  const RVector eta = RVector::Constant(1, 0.5);
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(HessianFd(band2, eta).b.data());
  }
}
BENCHMARK(BM_EdgeHessian)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
