// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>
#include <sstream>

#include "blochkit/bloch_spectrum.hpp"
#include "blochkit/errors.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace blochkit;

namespace
{

RVector Eta(double a) { return RVector::Constant(1, a); }

std::vector<double> FreeBands(const PlanewaveBasis &b, const RVector &eta, int n)
{
  return ShiftedLaplacianEigs(b, eta, n);
}

}  // namespace

TEST_CASE("grid layout")
{
  const BrillouinGrid g(1, 4);
  CHECK(g.Node(0)(0) == -0.5);
  CHECK(g.Node(3)(0) == 0.25);
  const BrillouinGrid g2(2, 3);
  CHECK(g2.Size() == 9);
  CHECK(g2.Neighbors(4).size() == 8);
  for (int i = 1; i < g2.Size(); i++)
  {
    const RVector a = g2.Node(i - 1), b = g2.Node(i);
    CHECK(std::lexicographical_compare(a.data(), a.data() + 2, b.data(), b.data() + 2));
  }
  CHECK_THROWS_AS(BrillouinGrid(1, 2), Error);
}

TEST_CASE("eigen fiber")
{
  CMatrix d = CMatrix::Zero(5, 5);
  d.diagonal() << 4, 1, 0, 4, 1;
  const EigenPairs ep = EigenFiber(d, 5);
  CHECK(ep.values(0) == 0.0);
  CHECK(ep.values(1) == 1.0);
  CHECK(ep.values(4) == 4.0);
  CHECK((ep.vectors.adjoint() * ep.vectors - CMatrix::Identity(5, 5)).norm() < 1e-12);

  const PlanewaveBasis b(1, 8);
  const EigenPairs free = EigenFiber(AssembleFiber(fixtures::Identity(1), b, Eta(0.3),
                                                   FactorizationRule::Laurent),
                                     6);
  const auto exact = FreeBands(b, Eta(0.3), 6);
  for (int n = 0; n < 6; n++)
  {
    CHECK(free.values(n) == doctest::Approx(exact[n]).epsilon(1e-14));
  }

  // Reassembly of a random Hermitian matrix.
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  CMatrix h(6, 6);
  for (int i = 0; i < 6; i++)
  {
    for (int j = 0; j < 6; j++)
    {
      h(i, j) = cplx(g(rng), g(rng));
    }
  }
  h = (h + h.adjoint()).eval();
  const EigenPairs r = EigenFiber(h, 6);
  CHECK((r.vectors * r.values.asDiagonal() * r.vectors.adjoint() - h).cwiseAbs().maxCoeff() <
        1e-10);
  CHECK(r.max_residual <= 1e-10 * (1 + r.values.cwiseAbs().maxCoeff()));
}

TEST_CASE("free bands on the grid")
{
  // Even M so the grid contains eta = 0, where bands 2 and 3 touch.
  const PlanewaveBasis b(1, 8);
  const BrillouinGrid g(1, 8);
  const BandStructure bands = ComputeBands(fixtures::Identity(1), b, g, 4);
  for (int i = 0; i < g.Size(); i++)
  {
    const auto exact = FreeBands(b, g.Node(i), 4);
    for (int n = 1; n <= 4; n++)
    {
      CHECK(bands.Value(i, n) == doctest::Approx(exact[n - 1]).epsilon(1e-13));
    }
  }
  CHECK(FindGaps(bands).empty());
}

TEST_CASE("lowest band starts at zero")
{
  const CoefficientField a = BuildScalar(fixtures::CosineSeries(1.0, {0.9}));
  const PlanewaveBasis b(1, 12);
  const EigenPairs ep = EigenFiber(AssembleFiber(a, b, Eta(0.0), FactorizationRule::Laurent), 1);
  CHECK(std::abs(ep.values(0)) < 1e-10);
  // Constant eigenvector.
  CHECK(std::abs(ep.vectors(b.Origin(), 0)) == doctest::Approx(1.0));
}

TEST_CASE("laminate opens a first gap")
{
  const BandStructure coarse =
      ComputeBands(fixtures::Laminate14(48), PlanewaveBasis(1, 24), BrillouinGrid(1, 65), 3);
  const auto gaps = FindGaps(coarse);
  REQUIRE(!gaps.empty());
  CHECK(gaps.front().band_below == 1);
  CHECK(gaps.front().lower < gaps.front().upper);
  CHECK(coarse.sigma_plus(0) < coarse.sigma_minus(1));
}

TEST_CASE("narrow gaps are found when wider than the tolerance")
{
  const CoefficientField a = BuildScalar(fixtures::CosineSeries(1.0, {0.1}));
  const BandStructure bands = ComputeBands(a, PlanewaveBasis(1, 12), BrillouinGrid(1, 64), 3);
  const auto gaps = FindGaps(bands);
  REQUIRE(!gaps.empty());
  // First-order gap at eta = 1/2 is |a^(1)| / 2 = 0.025 up to higher order.
  CHECK(gaps.front().Width() == doctest::Approx(0.025).epsilon(0.05));
  CHECK(FindGaps(bands, 1.0).empty());
}

TEST_CASE("multiplicity")
{
  const CoefficientField a1 = fixtures::Identity(1);
  const PlanewaveBasis b1(1, 6);
  CHECK(MultiplicityAt(a1, b1, Eta(0.5), 0.25).h == 2);
  CHECK(MultiplicityAt(a1, b1, Eta(0.3), 0.09).h == 1);
  const Cluster c4 = MultiplicityAt(fixtures::Identity(2), PlanewaveBasis(2, 3), RVector{{0.5, 0.5}}, 0.5);
  CHECK(c4.h == 4);
  CHECK((c4.vectors.adjoint() * c4.vectors - CMatrix::Identity(4, 4)).norm() < 1e-12);
  CHECK_THROWS_AS(MultiplicityAt(a1, b1, Eta(0.3), 0.5), Error);
  CHECK(DefaultClusterTol(0.5) == 1e-6);
  CHECK(DefaultClusterTol(4.0) == 4e-6);
}

TEST_CASE("continuity bound")
{
  const PlanewaveBasis b(1, 8);
  const CoefficientField i1 = fixtures::Identity(1);
  const ContinuityReport same = CheckContinuityBound(i1, i1, b, Eta(0.25), 1);
  CHECK(same.lhs == 0.0);
  CHECK(same.holds);

  const CoefficientField i2 = BuildScalar(FourierSeries::Constant(1, 2.0));
  const ContinuityReport scale = CheckContinuityBound(i1, i2, b, Eta(0.25), 1);
  CHECK(scale.lhs == doctest::Approx(0.0625));
  CHECK(scale.rhs == doctest::Approx(0.0625));
  CHECK(scale.holds);
}

TEST_CASE("spectral invariants on random fields")
{
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 4; trial++)
  {
    const int dim = 1 + trial % 2;
    const FourierSeries s = fixtures::RandomSeries(rng, dim, 2);
    const CoefficientField a = BuildScalar(s);
    const PlanewaveBasis b(dim, dim == 1 ? 10 : 4);
    const BrillouinGrid g(dim, dim == 1 ? 12 : 6);
    const int n = 5;
    const BandStructure bands = ComputeBands(a, b, g, n);
    // A + 0.5 I is pointwise larger.
    FourierSeries up = s;
    up.At({0, 0}) += 0.5;
    const BandStructure upper = ComputeBands(BuildScalar(up), b, g, n);
    double sup = 0.0;
    for (int p = 0; p < s.Lattice().Size(); p++)
    {
      sup += std::abs(s.Data()[p]);
    }
    for (int i = 0; i < g.Size(); i++)
    {
      const RVector eta = g.Node(i);
      const auto c = ShiftedLaplacianEigs(b, eta, n);
      for (int m = 1; m <= n; m++)
      {
        CHECK(bands.Value(i, m) >= -1e-10);
        if (m > 1)
        {
          CHECK(bands.Value(i, m - 1) <= bands.Value(i, m));
        }
        CHECK(bands.Value(i, m) <= upper.Value(i, m) + 1e-10);
        CHECK(bands.Value(i, m) >= a.CoercivityAlpha() * c[m - 1] - 1e-10);
        CHECK(bands.Value(i, m) <= sup * c[m - 1] + 1e-10);
      }
      const RVector shifted = eta + RVector::Ones(dim);
      const RVector v = FiberEigenvalues(AssembleFiber(a, b, shifted, FactorizationRule::Laurent).h, n);
      CHECK((v - bands.values.row(i).transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      const RVector r = FiberEigenvalues(AssembleFiberAt(a, b, -eta).h, n);
      CHECK((r - bands.values.row(i).transpose()).cwiseAbs().maxCoeff() <= 1e-8);
    }
    CHECK(std::abs(FiberEigenvalues(AssembleFiber(a, b, RVector::Zero(dim), FactorizationRule::Laurent).h, 1)(0)) <= 1e-10);
  }
}

TEST_CASE("band output is independent of the thread count")
{
  std::mt19937_64 rng(4);
  const CoefficientField a = fixtures::RandomMatrixField2d(rng, 2);
  const PlanewaveBasis b(2, 3);
  const BrillouinGrid g(2, 7);
  BandOptions one;
  BandOptions four;
  four.threads = 4;
  const BandStructure x = ComputeBands(a, b, g, 4, one);
  const BandStructure y = ComputeBands(a, b, g, 4, four);
  std::ostringstream sx, sy;
  WriteBandCsv(sx, x);
  WriteBandCsv(sy, y);
  CHECK(sx.str() == sy.str());
}

TEST_CASE("edge certification")
{
  SUBCASE("laminate upper edge of the first gap")
  {
    const CoefficientField a = fixtures::Laminate14(48);
    const PlanewaveBasis b(1, 24);
    const BandStructure bands = ComputeBands(a, b, BrillouinGrid(1, 65), 3);
    const SpectralGap gap = FindGaps(bands).front();
    const SpectralEdgeReport rep = CertifyEdgeHypotheses(a, b, bands, gap, EdgeSide::Upper);
    CHECK(rep.simple);
    CHECK(rep.band == 2);
    REQUIRE(rep.points.size() == 1);
    const double e = std::abs(rep.points[0].eta(0));
    // The finite cutoff breaks eta -> 1 - eta, which shifts the truncated
    // minimizer off 1/2 by the truncation error.
    CHECK((e < 1e-6 || std::abs(e - 0.5) < 1e-3));
    CHECK(rep.points[0].multiplicity == 1);
    CHECK(rep.a < rep.lambda0);
    CHECK(rep.a == doctest::Approx(rep.lambda0 - rep.delta / 2));
  }
  SUBCASE("touching free bands are not simple")
  {
    const CoefficientField a = fixtures::Identity(1);
    const PlanewaveBasis b(1, 6);
    const BrillouinGrid g(1, 8);
    const BandStructure bands = ComputeBands(a, b, g, 3);
    // Treat the maximum of band 1 as an edge.
    SpectralGap fake;
    fake.band_below = 1;
    fake.lower = bands.sigma_plus(0);
    fake.upper = bands.sigma_minus(1);
    fake.lower_nodes = {0};
    fake.upper_nodes = {0};
    const SpectralEdgeReport rep = CertifyEdgeHypotheses(a, b, bands, fake, EdgeSide::Lower);
    CHECK_FALSE(rep.simple);
    REQUIRE(!rep.points.empty());
    CHECK(rep.points[0].multiplicity == 2);
  }
  SUBCASE("free 2D corner is four-fold")
  {
    const CoefficientField a = fixtures::Identity(2);
    const PlanewaveBasis b(2, 3);
    const BrillouinGrid g(2, 6);
    const BandStructure bands = ComputeBands(a, b, g, 5);
    SpectralGap fake;
    fake.band_below = 1;
    fake.lower = bands.sigma_plus(0);
    fake.upper = bands.sigma_minus(1);
    const SpectralEdgeReport rep = CertifyEdgeHypotheses(a, b, bands, fake, EdgeSide::Lower);
    CHECK_FALSE(rep.simple);
    REQUIRE(!rep.points.empty());
    CHECK(rep.points[0].multiplicity == 4);
  }
}
