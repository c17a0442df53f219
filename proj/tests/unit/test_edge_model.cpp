// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "blochkit/bloch_spectrum.hpp"
#include "blochkit/edge_model.hpp"
#include "blochkit/errors.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace blochkit;

namespace
{

RVector Eta(double a) { return RVector::Constant(1, a); }

BandEvaluator Parabola(double a, double center = 0.0)
{
  return [a, center](const RVector &eta)
  {
    const double q = eta(0) - center;
    return a * q * q;
  };
}

double HarmonicMean(const std::vector<double> &v, const std::vector<double> &f)
{
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); i++)
  {
    s += f[i] / v[i];
  }
  return 1.0 / s;
}

}  // namespace

TEST_CASE("minimizer refinement")
{
  const BandEvaluator free1 = MakeBandEvaluator(fixtures::Identity(1), PlanewaveBasis(1, 6), 1);
  CHECK(std::abs(RefineMinimizer(free1, Eta(0.02), 1.0 / 16)(0)) < 1e-8);

  const CoefficientField lam = fixtures::Laminate14(32);
  const BandEvaluator band2 = MakeBandEvaluator(lam, PlanewaveBasis(1, 16), 2);
  const RVector e = RefineMinimizer(band2, Eta(0.48), 1.0 / 16);
  // Truncation breaks the symmetry about 1/2, so the discrete minimizer sits
  // slightly off it but no higher than the symmetric point.
  const double d = std::min(std::abs(e(0)), std::abs(std::abs(e(0)) - 0.5));
  CHECK(d < 1e-3);
  const RVector near = Eta(e(0) < 0.0 ? e(0) + 1.0 : e(0));
  CHECK(band2(near) <= band2(Eta(0.5)) + 1e-12);

  // Maximizer through a negated evaluator.
  const BandEvaluator neg = [](const RVector &eta) { return -(1.0 - 2.0 * eta(0) * eta(0)); };
  CHECK(std::abs(RefineMinimizer(neg, Eta(0.03), 0.1)(0)) < 1e-8);
}

TEST_CASE("finite difference Hessians")
{
  const HessianEstimate one = HessianFd(Parabola(1.0), Eta(0.0));
  CHECK(one.b(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  const HessianEstimate three = HessianFd(Parabola(3.0), Eta(0.0));
  CHECK(three.b(0, 0) == doctest::Approx(3.0).epsilon(1e-8));

  const BandEvaluator free2d = MakeBandEvaluator(fixtures::Identity(2), PlanewaveBasis(2, 3), 1);
  const HessianEstimate h2 = HessianFd(free2d, RVector::Zero(2));
  CHECK((h2.b - RMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((h2.b - h2.b.transpose()).cwiseAbs().maxCoeff() <= 1e-10);

  // Step halving stays inside the reported estimate.
  const BandEvaluator lam = MakeBandEvaluator(fixtures::Laminate14(32), PlanewaveBasis(1, 16), 1);
  const HessianEstimate hl = HessianFd(lam, Eta(0.0));
  CHECK((hl.b - hl.b_half).cwiseAbs().maxCoeff() <= hl.error_estimate);

  // Scaling the field scales B.
  const CoefficientField lam3 = BuildLaminate1d({3.0, 12.0}, {0.5, 0.5}, 32);
  const HessianEstimate h3 = HessianFd(MakeBandEvaluator(lam3, PlanewaveBasis(1, 16), 1), Eta(0.0));
  CHECK(h3.b(0, 0) == doctest::Approx(3.0 * hl.b(0, 0)).epsilon(1e-6));

  // Noise larger than the curvature signal is refused.
  const BandEvaluator noisy = [](const RVector &eta)
  { return eta(0) * eta(0) + 1e-5 * std::cos(7e3 * eta(0)); };
  CHECK_THROWS_AS(HessianFd(noisy, Eta(0.0)), Error);
}

TEST_CASE("nondegeneracy")
{
  const NondegeneracyResult id = NondegeneracyCheck(RMatrix::Identity(2, 2));
  CHECK(id.nondegenerate);
  CHECK(id.min_eigenvalue == doctest::Approx(1.0));
  RMatrix d = RMatrix::Zero(2, 2);
  d(0, 0) = 1.0;
  CHECK_FALSE(NondegeneracyCheck(d).nondegenerate);
  d(1, 1) = 1e-12;
  CHECK_FALSE(NondegeneracyCheck(d, 1e-8).nondegenerate);
}

TEST_CASE("cubic residual")
{
  EdgeModel m;
  m.eta = Eta(0.0);
  m.lambda0 = 0.0;
  m.b = RMatrix::Constant(1, 1, 2.0);
  CHECK(QuadraticResidual(Parabola(2.0), m, 0.02, 16) <= 1e-6);

  // Free band 1 at eta = 1/2 has a kink from the crossing.
  const BandEvaluator free1 = MakeBandEvaluator(fixtures::Identity(1), PlanewaveBasis(1, 6), 2);
  EdgeModel k;
  k.eta = Eta(0.5);
  k.lambda0 = 0.25;
  k.b = RMatrix::Constant(1, 1, 1.0);
  CHECK(QuadraticResidual(free1, k, 0.02, 16) > 1e3);

  // A true analytic edge has a stable constant.
  const CoefficientField lam = fixtures::Laminate14(32);
  const PlanewaveBasis b(1, 16);
  const BandEvaluator band1 = MakeBandEvaluator(lam, b, 1);
  const EdgeModel e = BuildEdgeModel(band1, Eta(0.0), 1);
  const double c1 = QuadraticResidual(band1, e, 0.04, 16);
  const double c2 = QuadraticResidual(band1, e, 0.02, 16);
  CHECK(c1 < 1e3);
  CHECK(c2 < 3.0 * c1 + 1.0);
}

TEST_CASE("edge model symmetry")
{
  const CoefficientField lam = fixtures::Laminate14(32);
  const PlanewaveBasis b(1, 16);
  const BandEvaluator band2 = MakeBandEvaluator(lam, b, 2);
  const EdgeModel plus = BuildEdgeModel(band2, Eta(0.5), 2);
  const EdgeModel minus = BuildEdgeModel(band2, Eta(-0.5), 2);
  CHECK(plus.b(0, 0) == doctest::Approx(minus.b(0, 0)).epsilon(1e-6));
  CHECK(plus.nondegenerate);
  CHECK(plus.hessian_error < 1e-2 * plus.b(0, 0));
}

TEST_CASE("homogenized matrix at the bottom")
{
  const RMatrix c = HomogenizedMatrixBottom(BuildScalar(FourierSeries::Constant(2, 2.5)),
                                            PlanewaveBasis(2, 2));
  CHECK((c - 2.5 * RMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);

  const RMatrix l14 = HomogenizedMatrixBottom(fixtures::Laminate14(64), PlanewaveBasis(1, 32), 1e-3,
                                              FactorizationRule::Inverse);
  CHECK(l14(0, 0) == doctest::Approx(HarmonicMean({1, 4}, {0.5, 0.5})).epsilon(1e-4));
  const RMatrix l19 = HomogenizedMatrixBottom(fixtures::Laminate19(64), PlanewaveBasis(1, 32), 1e-3,
                                              FactorizationRule::Inverse);
  CHECK(l19(0, 0) == doctest::Approx(3.0).epsilon(1e-4));

  // Smooth field: the harmonic mean of the 1D coefficient, evaluated by quadrature.
  const CoefficientField a = fixtures::OneCosine();
  double inv = 0.0;
  const int n = 4096;
  for (int i = 0; i < n; i++)
  {
    inv += 1.0 / a.Evaluate(Eta(2 * M_PI * i / n))(0, 0);
  }
  const double hm = n / inv;
  CHECK(HomogenizedMatrixBottom(a, PlanewaveBasis(1, 24))(0, 0) == doctest::Approx(hm).epsilon(1e-6));
}
