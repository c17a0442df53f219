// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <random>

#include "blochkit/coeff_field.hpp"
#include "blochkit/errors.hpp"
#include "blochkit/field_io.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace blochkit;

namespace
{

ErrorCode CodeOf(const std::function<void()> &fn)
{
  try
  {
    fn();
  }
  catch (const Error &e)
  {
    return e.code();
  }
  FAIL("expected blochkit::Error");
  return ErrorCode::SolverFailure;
}

RVector Point(double y0, double y1 = NAN)
{
  return std::isnan(y1) ? RVector::Constant(1, y0) : RVector{{y0, y1}};
}

}  // namespace

TEST_CASE("identity table gives a constant field")
{
  const CoefficientField a = fixtures::Identity(1);
  CHECK(a.CoercivityAlpha() == doctest::Approx(1.0));
  CHECK(a.SupNorm() == doctest::Approx(1.0));
  CHECK(a.Evaluate(Point(2.3))(0, 0) == doctest::Approx(1.0));
  const CoefficientField a2 = fixtures::Identity(2);
  CHECK((a2.Evaluate(Point(0.4, 5.0)) - RMatrix::Identity(2, 2)).norm() < 1e-15);
}

TEST_CASE("one cosine field")
{
  const CoefficientField a = fixtures::OneCosine();
  CHECK(a.CoercivityAlpha() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(a.Evaluate(Point(0.0))(0, 0) == doctest::Approx(1.5));
  CHECK(a.Evaluate(Point(std::numbers::pi))(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("negative minimum is rejected")
{
  CHECK(CodeOf([] { BuildScalar(fixtures::CosineSeries(1.0, {1.2})); }) == ErrorCode::NotCoercive);
}

TEST_CASE("wrong shapes are rejected")
{
  CHECK(CodeOf([] { BuildLaminate1d({1.0, 4.0}, {0.5}, 8); }) == ErrorCode::BadShape);
  CHECK(CodeOf([] { BuildLaminate1d({1.0, 4.0}, {0.5, 0.6}, 8); }) == ErrorCode::BadShape);
  CHECK(CodeOf([] { fixtures::OneCosine().Evaluate(RVector::Zero(2)); }) == ErrorCode::BadShape);
}

TEST_CASE("laminate mean and values")
{
  const CoefficientField one = BuildLaminate1d({1.0}, {1.0}, 8);
  CHECK(one.Evaluate(Point(1.0))(0, 0) == doctest::Approx(1.0));

  const CoefficientField lam = fixtures::Laminate14(32);
  CHECK(lam.Coefficient({0, 0}, 0, 0).real() == doctest::Approx(2.5));
  CHECK(std::abs(lam.Coefficient({0, 0}, 0, 0).imag()) < 1e-15);

  // Direct summation of the truncated series as oracle.
  for (double y : {std::numbers::pi / 2, 3 * std::numbers::pi / 2})
  {
    double direct = 0.0;
    for (int k = -32; k <= 32; k++)
    {
      const cplx c = lam.Coefficient({k, 0}, 0, 0);
      direct += (c * std::exp(cplx(0.0, k * y))).real();
    }
    const double v = lam.Evaluate(Point(y))(0, 0);
    CHECK(v == doctest::Approx(direct).epsilon(1e-12));
    CHECK((std::abs(v - 1.0) < 0.1 || std::abs(v - 4.0) < 0.1));
  }
}

TEST_CASE("coarse laminate truncation is checked for coercivity")
{
  // Kc = 2 keeps a positive minimum for (1, 4) halves; the certificate must
  // agree with a dense evaluation of the truncated profile.
  const CoefficientField lam = fixtures::Laminate14(2);
  double dense_min = INFINITY;
  for (int i = 0; i < 4000; i++)
  {
    dense_min = std::min(dense_min, lam.Evaluate(Point(2 * std::numbers::pi * i / 4000.0))(0, 0));
  }
  CHECK(lam.CoercivityAlpha() > 0.0);
  CHECK(lam.CoercivityAlpha() >= dense_min - 1e-2);
  // A thin stiff layer overshoots below zero.
  CHECK(CodeOf([] { BuildLaminate1d({0.05, 20.0}, {0.9, 0.1}, 2); }) == ErrorCode::NotCoercive);
}

TEST_CASE("Fourier synthesis reproduces trigonometric polynomials")
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2 * std::numbers::pi);
  for (int dim : {1, 2})
  {
    const FourierSeries s = fixtures::RandomSeries(rng, dim, 3);
    const CoefficientField a = BuildScalar(s);
    double err = 0.0;
    for (int i = 0; i < 1000; i++)
    {
      const RVector y = dim == 1 ? Point(u(rng)) : Point(u(rng), u(rng));
      err = std::max(err, std::abs(a.Evaluate(y)(0, 0) - s.Evaluate(y).real()));
    }
    CHECK(err <= 1e-12);
  }
}

TEST_CASE("stored tables satisfy reality and symmetry exactly")
{
  std::mt19937_64 rng(5);
  const CoefficientField a = fixtures::RandomMatrixField2d(rng, 2);
  const FourierMatrixTable &t = a.Coefficients();
  for (int p = 0; p < t.Lattice().Size(); p++)
  {
    const LatticeIndex k = t.Lattice().Index(p);
    const CMatrix m = t.Mode(k);
    const CMatrix mk = t.Mode(Negate(k));
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m - mk.conjugate()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("scaled addition")
{
  const CoefficientField a = fixtures::Identity(1);
  FourierSeries c(1, 1);
  c.At({1, 0}) = 0.5;
  c.At({-1, 0}) = 0.5;
  const PerturbationField b = PerturbationField::Scalar(c);

  const CoefficientField same = AddScaled(a, b, 0.0);
  CHECK(same.Evaluate(Point(0.7))(0, 0) == doctest::Approx(1.0));

  const CoefficientField p = AddScaled(a, b, 0.25);
  CHECK(p.Evaluate(Point(0.0))(0, 0) == doctest::Approx(1.25));
  CHECK(p.CoercivityAlpha() >= 0.5);
  CHECK(p.SupNorm() <= a.SupNorm() + 0.25 * b.SupNorm() + 1e-15);

  const double sigma0 = a.AdmissibleStep(b);
  CHECK(sigma0 == doctest::Approx(0.5));
  CHECK(CodeOf([&] { AddScaled(a, b, 1.5 * sigma0); }) == ErrorCode::StepTooLarge);
}

TEST_CASE("field documents round trip")
{
  std::mt19937_64 rng(9);
  const CoefficientField a = fixtures::RandomMatrixField2d(rng, 2);
  const CoefficientField back = ParseCoefficientField(FieldDocument(a));
  const RVector y = Point(0.3, 1.7);
  CHECK((a.Evaluate(y) - back.Evaluate(y)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("field documents violating symmetry are rejected")
{
  const std::string text = R"({"dimension": 2, "cutoff": 0, "modes": [
      {"k": [0, 0], "entries": [[[1, 0], [0.2, 0]], [[0.0, 0], [1, 0]]]}]})";
  CHECK(CodeOf([&] { ParseCoefficientField(text); }) == ErrorCode::InvalidField);
  const std::string real = R"({"dimension": 1, "cutoff": 1, "modes": [
      {"k": [0], "entries": [[[1, 0]]]}, {"k": [1], "entries": [[[0.2, 0]]]}]})";
  CHECK(CodeOf([&] { ParseCoefficientField(real); }) == ErrorCode::InvalidField);
}
