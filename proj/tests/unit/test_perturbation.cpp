// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <random>

#include "blochkit/bloch_spectrum.hpp"
#include "blochkit/errors.hpp"
#include "blochkit/perturbation.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace blochkit;

namespace
{

RVector Eta(double a) { return RVector::Constant(1, a); }

// diag(cos y) in 1D.
PerturbationField CosB() { return PerturbationField::Scalar(fixtures::CosineSeries(0.0, {1.0})); }

// Free cluster at eta = 1/2, assembled at the reduced point -1/2 where it is
// spanned by the modes k = 0 and k = 1.
CMatrix FreePairVectors(const PlanewaveBasis &b)
{
  CMatrix v = CMatrix::Zero(b.Size(), 2);
  v(b.Position({0, 0}), 0) = 1.0;
  v(b.Position({1, 0}), 1) = 1.0;
  return v;
}

double Diameter(const CoefficientField &a, const PerturbationField &b, const PlanewaveBasis &basis,
                const RVector &eta, double t, int first, int h)
{
  const RVector v =
      FiberEigenvalues(AssembleFiber(a, basis, eta, FactorizationRule::Laurent).h +
                           t * AssembleFiber(b, basis, eta).h,
                       first + h - 1);
  return v(first + h - 2) - v(first - 1);
}

CMatrix RandomUnitary(std::mt19937_64 &rng, int n)
{
  std::normal_distribution<double> g;
  CMatrix m(n, n);
  for (int i = 0; i < n; i++)
  {
    for (int j = 0; j < n; j++)
    {
      m(i, j) = cplx(g(rng), g(rng));
    }
  }
  return Eigen::HouseholderQR<CMatrix>(m).householderQ();
}

}  // namespace

TEST_CASE("splitting matrix of the free pair")
{
  const PlanewaveBasis b(1, 4);
  const SplittingMatrix z =
      BuildSplittingMatrix(PerturbationField::Zero(1), b, Eta(0.5), FreePairVectors(b));
  CHECK(z.g.norm() == 0.0);
  CHECK(FirstOrderSlopes(z).cwiseAbs().maxCoeff() == 0.0);

  const SplittingMatrix g = BuildSplittingMatrix(CosB(), b, Eta(0.5), FreePairVectors(b));
  CHECK(std::abs(g.g(0, 0)) < 1e-15);
  CHECK(std::abs(g.g(1, 1)) < 1e-15);
  CHECK(g.g(0, 1).real() == doctest::Approx(-0.125));
  CHECK(g.g(1, 0).real() == doctest::Approx(-0.125));
  const RVector s = FirstOrderSlopes(g);
  CHECK(s(0) == doctest::Approx(-0.125));
  CHECK(s(1) == doctest::Approx(0.125));
  CHECK(Spread(s) == doctest::Approx(0.25));
}

TEST_CASE("splitting matrix with B = A is the eigenvalue")
{
  const CoefficientField a = fixtures::OneCosine();
  const PlanewaveBasis b(1, 10);
  const RVector eta = Eta(0.2);
  const EigenPairs ep = EigenFiber(AssembleFiber(a, b, eta, FactorizationRule::Laurent), 2);
  const PerturbationField pa = PerturbationField::FromFourier(a.Coefficients());
  const SplittingMatrix g = BuildSplittingMatrix(pa, b, eta, ep.vectors.col(1));
  CHECK(g.g(0, 0).real() == doctest::Approx(ep.values(1)).epsilon(1e-12));
}

TEST_CASE("unitary covariance of the splitting matrix")
{
  std::mt19937_64 rng(8);
  const CoefficientField a = fixtures::Identity(2);
  const PlanewaveBasis b(2, 3);
  const RVector eta{{0.5, 0.5}};
  const Cluster cl = MultiplicityAt(a, b, eta, 0.5);
  const FourierSeries beta = fixtures::RandomSeries(rng, 2, 2);
  const PerturbationField pb = PerturbationField::DiagonalSlot(beta, 2, 0);
  const SplittingMatrix g = BuildSplittingMatrix(pb, b, eta, cl.vectors);
  CHECK((g.g - g.g.adjoint()).cwiseAbs().maxCoeff() <= 1e-10);
  const CMatrix w = RandomUnitary(rng, cl.h);
  const SplittingMatrix gw = BuildSplittingMatrix(pb, b, eta, cl.vectors * w);
  CHECK((gw.g - w.adjoint() * g.g * w).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(std::abs(gw.g.trace() - g.g.trace()) <= 1e-10);
  CHECK((FirstOrderSlopes(gw) - FirstOrderSlopes(g)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("branch tracking")
{
  const CoefficientField a = fixtures::Identity(1);
  const PlanewaveBasis b(1, 6);
  const RVector eta = Eta(0.5);
  const Cluster cl = MultiplicityAt(a, b, eta, 0.25);
  const EigenPairs ep = EigenFiber(AssembleFiber(a, b, eta, FactorizationRule::Laurent), 4);
  const std::vector<double> ts{-1e-2, -5e-3, -1e-3, 1e-3, 5e-3, 1e-2};

  const auto flat = TrackBranches(a, PerturbationField::Zero(1), b, eta, cl, ts, DefaultWindow(ep, cl));
  for (const auto &br : flat)
  {
    CHECK(std::abs(br.slope) < 1e-12);
  }

  const auto branches = TrackBranches(a, CosB(), b, eta, cl, ts, DefaultWindow(ep, cl));
  REQUIRE(branches.size() == 2);
  CHECK(branches[0].slope == doctest::Approx(-0.125).epsilon(1e-6));
  CHECK(branches[1].slope == doctest::Approx(0.125).epsilon(1e-6));
  // Multiset of branch values equals the cluster eigenvalues at each t.
  const CMatrix ha = AssembleFiber(a, b, eta, FactorizationRule::Laurent).h;
  const CMatrix hb = AssembleFiber(CosB(), b, eta).h;
  for (std::size_t i = 0; i < branches[0].t.size(); i++)
  {
    const double t = branches[0].t[i];
    const RVector v = FiberEigenvalues(ha + t * hb, 2);
    const double lo = std::min(branches[0].values[i], branches[1].values[i]);
    const double hi = std::max(branches[0].values[i], branches[1].values[i]);
    CHECK(lo == doctest::Approx(v(0)).epsilon(1e-12));
    CHECK(hi == doctest::Approx(v(1)).epsilon(1e-12));
  }
}

TEST_CASE("tracking follows analytic labels through a crossing")
{
  // h_a + t h_b with eigenvalues 1 + t and 1 - t on a 2x2 block plus a far mode.
  CMatrix ha = CMatrix::Zero(3, 3);
  ha.diagonal() << 1.0, 1.0, 5.0;
  CMatrix hb = CMatrix::Zero(3, 3);
  hb.diagonal() << 1.0, -1.0, 0.0;
  Cluster cl;
  cl.h = 2;
  cl.first_band = 1;
  cl.values = RVector::Ones(2);
  cl.vectors = CMatrix::Identity(3, 2);
  const std::vector<double> ts{-0.02, -0.01, 0.01, 0.02};
  const auto br = TrackBranches(ha, hb, cl.vectors, ts, BranchWindow{0.5, 1.5});
  REQUIRE(br.size() == 2);
  // Each tracked branch is linear: second difference vanishes across t = 0.
  for (const auto &b : br)
  {
    for (std::size_t i = 0; i < b.t.size(); i++)
    {
      CHECK(b.values[i] == doctest::Approx(1.0 + b.slope * b.t[i]).epsilon(1e-12));
    }
  }
  CHECK(br[0].slope == doctest::Approx(-1.0));
  CHECK(br[1].slope == doctest::Approx(1.0));
}

TEST_CASE("single point splitting plans")
{
  SUBCASE("free pair in 1D")
  {
    const CoefficientField a = fixtures::Identity(1);
    const PlanewaveBasis b(1, 8);
    const Cluster cl = MultiplicityAt(a, b, Eta(0.5), 0.25);
    const PerturbationPlan plan = ConstructSplittingB(a, b, Eta(0.5), cl);
    REQUIRE(plan.targets.size() == 1);
    const double spread = plan.targets[0].spread;
    CHECK(spread > 0.0);
    CHECK(plan.b.SupNorm() == doctest::Approx(1.0));
    CHECK(plan.sigma0 > 0.0);
    CHECK(plan.t0 <= plan.sigma0);
    CHECK(plan.sigma0 == doctest::Approx(a.AdmissibleStep(plan.b)));
    CHECK(Diameter(a, plan.b, b, Eta(0.5), 1e-3, cl.first_band, 2) > 0.5 * spread * 1e-3);
    // Linear splitting up to the reported t_lin.
    for (double f : {0.1, 0.5, 1.0})
    {
      const double t = f * plan.t_lin;
      CHECK(Diameter(a, plan.b, b, Eta(0.5), t, cl.first_band, 2) >= 0.5 * spread * t);
    }
    // First-order slopes agree with tracked branches.
    const EigenPairs ep = EigenFiber(AssembleFiber(a, b, Eta(0.5), FactorizationRule::Laurent), 4);
    const auto br = TrackBranches(a, plan.b, b, Eta(0.5), cl, {-2e-4, -1e-4, 1e-4, 2e-4},
                                  DefaultWindow(ep, cl));
    for (int i = 0; i < 2; i++)
    {
      CHECK(std::abs(br[i].slope - plan.targets[0].slopes(i)) <=
            1e-5 * (1 + std::abs(br[i].slope)));
    }
  }
  SUBCASE("simple cluster is rejected")
  {
    const CoefficientField a = fixtures::Identity(1);
    const PlanewaveBasis b(1, 8);
    const Cluster cl = MultiplicityAt(a, b, Eta(0.3), 0.09);
    CHECK_THROWS_AS(ConstructSplittingB(a, b, Eta(0.3), cl), Error);
  }
  SUBCASE("2D corner loses multiplicity")
  {
    const CoefficientField a = fixtures::Identity(2);
    const PlanewaveBasis b(2, 3);
    const RVector eta{{0.5, 0.5}};
    const Cluster cl = MultiplicityAt(a, b, eta, 0.5);
    const PerturbationPlan plan = ConstructSplittingB(a, b, eta, cl);
    const CoefficientField p = AddScaled(a, plan.b, 1e-3);
    const EigenPairs ep = EigenFiber(AssembleFiber(p, b, eta, FactorizationRule::Laurent), 6);
    int max_h = 0;
    for (int n = 0; n < 4; n++)
    {
      max_h = std::max(max_h, ClusterFromPairs(ep, ep.values(n)).h);
    }
    CHECK(max_h <= 3);
  }
}

TEST_CASE("multi point plans")
{
  const CoefficientField a = fixtures::Identity(1);
  const PlanewaveBasis b(1, 8);
  SUBCASE("reflection pair")
  {
    const PerturbationPlan plan = ConstructMultiPointB(a, b, {{Eta(0.5), 0.25}, {Eta(-0.5), 0.25}});
    CHECK(plan.t0 > 0.0);
    CHECK(plan.budget_used <= plan.budget);
    for (const auto &tg : plan.targets)
    {
      CHECK(Diameter(a, plan.b, b, tg.eta, plan.t0, tg.first_band, tg.h) > 0.0);
      const CoefficientField p = AddScaled(a, plan.b, plan.t0);
      CHECK(MultiplicityAt(p, b, tg.eta, FiberEigenvalues(AssembleFiber(p, b, tg.eta, FactorizationRule::Laurent).h, 1)(0)).h == 1);
    }
  }
  SUBCASE("single target agrees with the single point construction")
  {
    const PerturbationPlan multi = ConstructMultiPointB(a, b, {{Eta(0.5), 0.25}});
    const CoefficientField p = AddScaled(a, multi.b, multi.t0);
    const EigenPairs ep = EigenFiber(AssembleFiber(p, b, Eta(0.5), FactorizationRule::Laurent), 2);
    CHECK(ep.values(1) - ep.values(0) > DefaultClusterTol(0.25));
  }
  SUBCASE("seeded search is reproducible")
  {
    MultiPointOptions o;
    o.seed = 42;
    const PerturbationPlan x = ConstructMultiPointB(a, b, {{Eta(0.5), 0.25}}, o);
    const PerturbationPlan y = ConstructMultiPointB(a, b, {{Eta(0.5), 0.25}}, o);
    CHECK(PlanDocument(x) == PlanDocument(y));
  }
  SUBCASE("already simple targets give an empty plan")
  {
    const PerturbationPlan plan = ConstructMultiPointB(a, b, {{Eta(0.3), 0.09}});
    CHECK(plan.t0 == 0.0);
    CHECK(plan.b.IsZero());
  }
}

TEST_CASE("edge containment")
{
  const CoefficientField a = fixtures::Laminate14(32);
  const PlanewaveBasis b(1, 16);
  const BrillouinGrid g(1, 65);
  const BandStructure bands = ComputeBands(a, b, g, 3);
  const SpectralGap gap = FindGaps(bands).front();
  const SpectralEdgeReport rep = CertifyEdgeHypotheses(a, b, bands, gap, EdgeSide::Upper);
  std::vector<RVector> pts;
  for (const auto &p : rep.points)
  {
    pts.push_back(p.eta);
  }
  const ContainmentReport c =
      EdgeContainmentCheck(a, CosB(), b, g, rep.band, EdgeSide::Upper, {0.0, 1e-3}, pts, 0.1);
  CHECK(c.all_contained);
  for (const auto &e : c.entries)
  {
    CHECK(e.shift_ok);
  }
  CHECK(c.entries.front().shift == doctest::Approx(0.0));
}

TEST_CASE("fibered cover")
{
  SUBCASE("already simple band")
  {
    const FiberedPlan plan =
        FiberedGlobalPerturbation(fixtures::OneCosine(), PlanewaveBasis(1, 8), BrillouinGrid(1, 16), 1, 2);
    CHECK(plan.certified);
    REQUIRE(plan.cells.size() == 1);
    CHECK(plan.cells[0].b.IsZero());
  }
  SUBCASE("free band 1 is split at the cell boundary")
  {
    const CoefficientField a = fixtures::Identity(1);
    const PlanewaveBasis b(1, 8);
    const BrillouinGrid g(1, 16);
    const FiberedPlan plan = FiberedGlobalPerturbation(a, b, g, 1, 2);
    CHECK(plan.certified);
    int nontrivial = 0;
    for (const auto &c : plan.cells)
    {
      nontrivial += c.b.IsZero() ? 0 : 1;
    }
    CHECK(nontrivial >= 1);
    // Independent re-check of simplicity at every node.
    for (int i = 0; i < g.Size(); i++)
    {
      const FiberedCell &cell = plan.cells[plan.node_cell[i]];
      const CoefficientField p = cell.b.IsZero() ? a : AddScaled(a, cell.b, cell.t);
      const RVector v = FiberEigenvalues(AssembleFiber(p, b, g.Node(i), FactorizationRule::Laurent).h, 2);
      CHECK(v(1) - v(0) > plan.cluster_tol);
    }
  }
}

TEST_CASE("edge splitting by a bump")
{
  const CoefficientField a = fixtures::Identity(1);
  const PlanewaveBasis b(1, 8);
  const BrillouinGrid g(1, 32);
  const EdgeSplitResult r = EdgeSplitW1Inf(a, b, g, Eta(0.5), 0.25, 8);
  CHECK(r.verified);
  CHECK(r.plan.sign == -1);
  CHECK(r.bump_integral == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.theta > 0.0);
  for (const auto &row : r.rows)
  {
    CHECK(row.lambda_m < row.bound_m);
    CHECK(row.min_lambda_m1 > row.bound_m1);
  }
  // The bump itself is nonnegative with unit integral.
  const FourierSeries bump = RaisedCosineBump(Eta(1.0), 4);
  CHECK(bump[{0, 0}].real() * 2 * std::numbers::pi == doctest::Approx(1.0));
  for (int i = 0; i < 200; i++)
  {
    CHECK(bump.Evaluate(Eta(2 * std::numbers::pi * i / 200.0)).real() >= -1e-14);
  }
}
