// SPDX-License-Identifier: Apache-2.0

#include "blochkit/coeff_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blochkit/errors.hpp"

namespace blochkit
{

namespace
{

// Visits all nodes of a uniform n^d grid on [0, 2pi)^d.
template <typename Fn>
void ForEachSample(int dim, int n, Fn &&fn)
{
  RVector y(dim);
  const double h = kTwoPi / n;
  if (dim == 1)
  {
    for (int i = 0; i < n; i++)
    {
      y(0) = i * h;
      fn(y);
    }
    return;
  }
  for (int i = 0; i < n; i++)
  {
    for (int j = 0; j < n; j++)
    {
      y(0) = i * h;
      y(1) = j * h;
      fn(y);
    }
  }
}

double MinEigenvalue(const RMatrix &a)
{
  if (a.rows() == 1)
  {
    return a(0, 0);
  }
  const double mean = 0.5 * (a(0, 0) + a(1, 1));
  const double diff = 0.5 * (a(0, 0) - a(1, 1));
  return mean - std::hypot(diff, a(0, 1));
}

double EntrySupBound(const FourierMatrixTable &t)
{
  const int d = t.Dimension();
  double best = 0.0;
  for (int l = 0; l < d; l++)
  {
    for (int m = 0; m < d; m++)
    {
      best = std::max(best, t.Entry(l, m).AbsSum());
    }
  }
  return best;
}

}  // namespace

cplx LaminateProfile::Coefficient(int k, int power) const
{
  double x0 = 0.0;
  cplx sum = 0.0;
  for (std::size_t i = 0; i < values.size(); i++)
  {
    const double v = power == 1 ? values[i] : 1.0 / values[i];
    const double x1 = x0 + kTwoPi * fractions[i];
    if (k == 0)
    {
      sum += v * (x1 - x0);
    }
    else
    {
      const cplx e0 = std::polar(1.0, -k * x0);
      const cplx e1 = std::polar(1.0, -k * x1);
      sum += v * (e0 - e1) / cplx(0.0, k);
    }
    x0 = x1;
  }
  return sum / kTwoPi;
}

double LaminateProfile::Mean() const
{
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); i++)
  {
    s += fractions[i] * values[i];
  }
  return s;
}

double LaminateProfile::HarmonicMean() const
{
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); i++)
  {
    s += fractions[i] / values[i];
  }
  return 1.0 / s;
}

MatrixField::MatrixField(FourierMatrixTable table)
  : table_(std::move(table)), sup_norm_(EntrySupBound(table_))
{
}

RMatrix MatrixField::Evaluate(const RVector &y) const
{
  const int d = Dimension();
  Require(y.size() == d, ErrorCode::BadShape, "evaluation point has wrong dimension");
  const auto &lat = table_.Lattice();
  CMatrix acc = CMatrix::Zero(d, d);
  for (int p = 0; p < lat.Size(); p++)
  {
    const LatticeIndex k = lat.Index(p);
    double phase = k[0] * y(0);
    if (d == 2)
    {
      phase += k[1] * y(1);
    }
    const cplx e(std::cos(phase), std::sin(phase));
    for (int l = 0; l < d; l++)
    {
      for (int m = 0; m < d; m++)
      {
        acc(l, m) += table_.Data()[(p * d + l) * d + m] * e;
      }
    }
  }
  // Imaginary residue is rounding only, since the table is real-symmetrized.
  return acc.real();
}

double MatrixField::OperatorNormBound() const
{
  const auto &lat = table_.Lattice();
  double s = 0.0;
  for (int p = 0; p < lat.Size(); p++)
  {
    const CMatrix mode = table_.Mode(lat.Index(p));
    if (mode.rows() == 1)
    {
      s += std::abs(mode(0, 0));
    }
    else
    {
      Eigen::JacobiSVD<CMatrix> svd(mode);
      s += svd.singularValues()(0);
    }
  }
  return s;
}

double MatrixField::SampledMaxEntry(int points_per_axis) const
{
  double best = 0.0;
  ForEachSample(Dimension(), points_per_axis, [&](const RVector &y)
                { best = std::max(best, Evaluate(y).cwiseAbs().maxCoeff()); });
  return best;
}

double MatrixField::SampledMinEigenvalue(int points_per_axis) const
{
  double best = std::numeric_limits<double>::infinity();
  ForEachSample(Dimension(), points_per_axis, [&](const RVector &y)
                { best = std::min(best, MinEigenvalue(Evaluate(y))); });
  return best;
}

bool MatrixField::IsZero() const
{
  return std::all_of(table_.Data().begin(), table_.Data().end(),
                     [](const cplx &c) { return c == cplx(0.0); });
}

FourierMatrixTable Symmetrize(const FourierMatrixTable &table)
{
  const int d = table.Dimension();
  const auto &lat = table.Lattice();
  FourierMatrixTable sym(d, table.Cutoff());
  for (int p = 0; p < lat.Size(); p++)
  {
    const LatticeIndex k = lat.Index(p);
    for (int l = 0; l < d; l++)
    {
      for (int m = 0; m < d; m++)
      {
        sym.Set(k, l, m, 0.5 * (table.Get(k, l, m) + table.Get(k, m, l)));
      }
    }
  }
  FourierMatrixTable out(d, table.Cutoff());
  for (int p = 0; p < lat.Size(); p++)
  {
    const LatticeIndex k = lat.Index(p);
    for (int l = 0; l < d; l++)
    {
      for (int m = 0; m < d; m++)
      {
        out.Set(k, l, m, 0.5 * (sym.Get(k, l, m) + std::conj(sym.Get(Negate(k), l, m))));
      }
    }
  }
  return out;
}

PerturbationField PerturbationField::FromFourier(const FourierMatrixTable &table)
{
  return PerturbationField(Symmetrize(table));
}

PerturbationField PerturbationField::Zero(int dim)
{
  return FromFourier(FourierMatrixTable(dim, 0));
}

PerturbationField PerturbationField::Scalar(const FourierSeries &beta)
{
  const int d = beta.Dimension();
  FourierMatrixTable t(d, beta.Cutoff());
  for (int l = 0; l < d; l++)
  {
    t.SetEntry(l, l, beta);
  }
  return FromFourier(t);
}

PerturbationField PerturbationField::DiagonalSlot(const FourierSeries &beta, int dim, int j)
{
  Require(beta.Dimension() == dim && j >= 0 && j < dim, ErrorCode::BadShape,
          "diagonal slot out of range");
  FourierMatrixTable t(dim, beta.Cutoff());
  t.SetEntry(j, j, beta);
  return FromFourier(t);
}

PerturbationField PerturbationField::Scaled(double s) const
{
  FourierMatrixTable t(Dimension(), Cutoff());
  const auto &lat = table_.Lattice();
  for (int p = 0; p < lat.Size(); p++)
  {
    t.SetMode(lat.Index(p), s * table_.Mode(lat.Index(p)));
  }
  return FromFourier(t);
}

PerturbationField PerturbationField::Plus(const PerturbationField &other, double s) const
{
  Require(other.Dimension() == Dimension(), ErrorCode::BadShape, "dimension mismatch");
  const int kc = std::max(Cutoff(), other.Cutoff());
  FourierMatrixTable t(Dimension(), kc);
  const auto &lat = t.Lattice();
  for (int p = 0; p < lat.Size(); p++)
  {
    const LatticeIndex k = lat.Index(p);
    t.SetMode(k, table_.Mode(k) + s * other.table_.Mode(k));
  }
  return FromFourier(t);
}

int CoefficientField::ValidationPoints(int cutoff) { return std::max(4 * cutoff, 4); }

FourierSeries CoefficientField::ReciprocalCoefficients(int cutoff) const
{
  Require(Dimension() == 1, ErrorCode::BadShape, "reciprocal coefficients need a 1D field");
  FourierSeries out(1, cutoff);
  if (profile_)
  {
    for (int k = -cutoff; k <= cutoff; k++)
    {
      out.At({k, 0}) = profile_->Coefficient(k, -1);
    }
    return out;
  }
  const int q = std::max(1024, 16 * (cutoff + Cutoff() + 1));
  std::vector<double> inv(q);
  RVector y(1);
  for (int i = 0; i < q; i++)
  {
    y(0) = kTwoPi * i / q;
    inv[i] = 1.0 / Evaluate(y)(0, 0);
  }
  for (int k = -cutoff; k <= cutoff; k++)
  {
    cplx s = 0.0;
    for (int i = 0; i < q; i++)
    {
      s += inv[i] * std::polar(1.0, -kTwoPi * k * i / q);
    }
    out.At({k, 0}) = s / static_cast<double>(q);
  }
  return out;
}

double CoefficientField::AdmissibleStep(const PerturbationField &b) const
{
  if (b.SupNorm() == 0.0)
  {
    return std::numeric_limits<double>::infinity();
  }
  return alpha_ / (2.0 * Dimension() * b.SupNorm());
}

CoefficientField BuildFromFourier(const FourierMatrixTable &table)
{
  const int d = table.Dimension();
  Require(d == 1 || d == 2, ErrorCode::BadShape, "dimension must be 1 or 2");
  CoefficientField f(Symmetrize(table));
  const double alpha = f.SampledMinEigenvalue(CoefficientField::ValidationPoints(table.Cutoff()));
  Require(alpha > 0.0, ErrorCode::NotCoercive,
          "smallest sampled eigenvalue " + std::to_string(alpha) + " is not positive");
  f.alpha_ = alpha;
  return f;
}

CoefficientField BuildLaminate1d(const std::vector<double> &values,
                                 const std::vector<double> &fractions, int cutoff)
{
  Require(!values.empty() && values.size() == fractions.size(), ErrorCode::BadShape,
          "laminate needs one fraction per value");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); i++)
  {
    Require(values[i] > 0.0, ErrorCode::NotCoercive, "laminate values must be positive");
    Require(fractions[i] > 0.0, ErrorCode::BadShape, "laminate fractions must be positive");
    total += fractions[i];
  }
  Require(std::abs(total - 1.0) <= 1e-12, ErrorCode::BadShape, "fractions must sum to 1");
  LaminateProfile profile{values, fractions};
  FourierMatrixTable t(1, cutoff);
  for (int k = -cutoff; k <= cutoff; k++)
  {
    t.Set({k, 0}, 0, 0, profile.Coefficient(k));
  }
  CoefficientField f = BuildFromFourier(t);
  f.profile_ = profile;
  return f;
}

CoefficientField BuildScalar(const FourierSeries &a)
{
  const int d = a.Dimension();
  FourierMatrixTable t(d, a.Cutoff());
  for (int l = 0; l < d; l++)
  {
    t.SetEntry(l, l, a);
  }
  return BuildFromFourier(t);
}

CoefficientField BuildSeparable2d(const FourierSeries &a1d)
{
  Require(a1d.Dimension() == 1, ErrorCode::BadShape, "separable profile must be 1D");
  const int kc = a1d.Cutoff();
  FourierMatrixTable t(2, kc);
  for (int k = -kc; k <= kc; k++)
  {
    t.Set({k, 0}, 0, 0, a1d[{k, 0}]);
    t.Set({0, k}, 1, 1, a1d[{k, 0}]);
  }
  return BuildFromFourier(t);
}

RMatrix Evaluate(const MatrixField &field, const RVector &y) { return field.Evaluate(y); }

CoefficientField AddScaled(const CoefficientField &a, const PerturbationField &b, double t)
{
  Require(a.Dimension() == b.Dimension(), ErrorCode::BadShape, "dimension mismatch");
  if (t == 0.0 || b.IsZero())
  {
    return a;
  }
  const double sigma0 = a.AdmissibleStep(b);
  Require(std::abs(t) < sigma0, ErrorCode::StepTooLarge,
          "|t| = " + std::to_string(std::abs(t)) + " >= sigma0 = " + std::to_string(sigma0));
  const int kc = std::max(a.Cutoff(), b.Cutoff());
  FourierMatrixTable sum(a.Dimension(), kc);
  const auto &lat = sum.Lattice();
  for (int p = 0; p < lat.Size(); p++)
  {
    const LatticeIndex k = lat.Index(p);
    sum.SetMode(k, a.Coefficients().Mode(k) + t * b.Coefficients().Mode(k));
  }
  CoefficientField out = BuildFromFourier(sum);
  Require(out.CoercivityAlpha() >= 0.5 * a.CoercivityAlpha(), ErrorCode::NotCoercive,
          "perturbed field lost more than half of the coercivity constant");
  return out;
}

}  // namespace blochkit
