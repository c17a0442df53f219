// SPDX-License-Identifier: Apache-2.0

// Coefficient fields shared by the unit tests and the acceptance runner.

#ifndef BLOCHKIT_TESTS_FIXTURES_HPP
#define BLOCHKIT_TESTS_FIXTURES_HPP

#include <cmath>
#include <random>

#include "blochkit/coeff_field.hpp"
#include "blochkit/fourier.hpp"

namespace fixtures
{

using namespace blochkit;

inline FourierSeries CosineSeries(double mean, std::initializer_list<double> amplitudes)
{
  const int n = static_cast<int>(amplitudes.size());
  FourierSeries s(1, n);
  s.At({0, 0}) = mean;
  int k = 1;
  for (double a : amplitudes)
  {
    s.At({k, 0}) = 0.5 * a;
    s.At({-k, 0}) = 0.5 * a;
    k++;
  }
  return s;
}

inline CoefficientField Identity(int dim) { return BuildScalar(FourierSeries::Constant(dim, 1.0)); }

// a(y) = 1 + 0.5 cos y.
inline CoefficientField OneCosine() { return BuildScalar(CosineSeries(1.0, {0.5})); }

// a = 1 + 0.3 cos y + 0.8 cos 2y in both slots of diag(a(y1), a(y2)).
inline CoefficientField Separable2d() { return BuildSeparable2d(CosineSeries(1.0, {0.3, 0.8})); }

inline CoefficientField Laminate14(int cutoff) { return BuildLaminate1d({1.0, 4.0}, {0.5, 0.5}, cutoff); }

inline CoefficientField Laminate19(int cutoff)
{
  return BuildLaminate1d({1.0, 9.0}, {0.25, 0.75}, cutoff);
}

// Random real trig polynomial of the given order with mean large enough to
// stay coercive (min >= 0.5).
inline FourierSeries RandomSeries(std::mt19937_64 &rng, int dim, int order, double scale = 0.5)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FourierSeries s(dim, order);
  const ModeLattice &lat = s.Lattice();
  double abs_sum = 0.0;
  for (int i = 0; i < lat.Size(); i++)
  {
    const LatticeIndex k = lat.Index(i);
    const LatticeIndex mk = Negate(k);
    if (lat.Position(mk) < i || (k[0] == 0 && k[1] == 0))
    {
      continue;
    }
    const cplx c(scale * u(rng), scale * u(rng));
    s.At(k) = c;
    s.At(mk) = std::conj(c);
    abs_sum += 2.0 * std::abs(c);
  }
  s.At({0, 0}) = 0.5 + abs_sum + std::abs(u(rng));
  return s;
}

// Random symmetric 2x2 field with a dominant diagonal.
inline CoefficientField RandomMatrixField2d(std::mt19937_64 &rng, int order)
{
  FourierMatrixTable t(2, order);
  const FourierSeries a11 = RandomSeries(rng, 2, order, 0.2);
  const FourierSeries a22 = RandomSeries(rng, 2, order, 0.2);
  FourierSeries a12 = RandomSeries(rng, 2, order, 0.1);
  a12.At({0, 0}) = 0.1;
  t.SetEntry(0, 0, a11);
  t.SetEntry(1, 1, a22);
  t.SetEntry(0, 1, a12);
  t.SetEntry(1, 0, a12);
  return BuildFromFourier(t);
}

}  // namespace fixtures

#endif  // BLOCHKIT_TESTS_FIXTURES_HPP
