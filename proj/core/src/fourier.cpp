// SPDX-License-Identifier: Apache-2.0

#include "blochkit/fourier.hpp"

#include <cmath>

#include "blochkit/errors.hpp"

namespace blochkit
{

ModeLattice::ModeLattice(int dim, int cutoff) : dim_(dim), cutoff_(cutoff)
{
  Require(dim == 1 || dim == 2, ErrorCode::BadShape, "dimension must be 1 or 2");
  Require(cutoff >= 0, ErrorCode::BadShape, "cutoff must be nonnegative");
  size_ = (dim == 1) ? Side() : Side() * Side();
}

bool ModeLattice::Contains(const LatticeIndex &k) const
{
  if (std::abs(k[0]) > cutoff_)
  {
    return false;
  }
  return dim_ == 1 ? k[1] == 0 : std::abs(k[1]) <= cutoff_;
}

int ModeLattice::Position(const LatticeIndex &k) const
{
  if (!Contains(k))
  {
    return -1;
  }
  if (dim_ == 1)
  {
    return k[0] + cutoff_;
  }
  return (k[0] + cutoff_) * Side() + (k[1] + cutoff_);
}

LatticeIndex ModeLattice::Index(int pos) const
{
  if (dim_ == 1)
  {
    return {pos - cutoff_, 0};
  }
  return {pos / Side() - cutoff_, pos % Side() - cutoff_};
}

FourierSeries::FourierSeries(int dim, int cutoff)
  : lattice_(dim, cutoff), data_(lattice_.Size(), cplx(0.0))
{
}

FourierSeries FourierSeries::Constant(int dim, double value)
{
  FourierSeries s(dim, 0);
  s.data_[0] = value;
  return s;
}

cplx FourierSeries::operator[](const LatticeIndex &k) const
{
  const int p = lattice_.Position(k);
  return p < 0 ? cplx(0.0) : data_[p];
}

cplx &FourierSeries::At(const LatticeIndex &k)
{
  const int p = lattice_.Position(k);
  Require(p >= 0, ErrorCode::BadShape, "mode outside series cutoff");
  return data_[p];
}

cplx FourierSeries::Evaluate(const RVector &y) const
{
  cplx sum = 0.0;
  for (int p = 0; p < lattice_.Size(); p++)
  {
    const LatticeIndex k = lattice_.Index(p);
    double phase = k[0] * y(0);
    if (Dimension() == 2)
    {
      phase += k[1] * y(1);
    }
    sum += data_[p] * cplx(std::cos(phase), std::sin(phase));
  }
  return sum;
}

FourierSeries FourierSeries::Truncated(int cutoff) const
{
  FourierSeries out(Dimension(), cutoff);
  for (int p = 0; p < out.lattice_.Size(); p++)
  {
    out.data_[p] = (*this)[out.lattice_.Index(p)];
  }
  return out;
}

FourierSeries FourierSeries::RealPart() const
{
  FourierSeries out(Dimension(), Cutoff());
  for (int p = 0; p < lattice_.Size(); p++)
  {
    const LatticeIndex k = lattice_.Index(p);
    out.data_[p] = 0.5 * (data_[p] + std::conj((*this)[Negate(k)]));
  }
  return out;
}

FourierSeries FourierSeries::ImagPart() const
{
  FourierSeries out(Dimension(), Cutoff());
  for (int p = 0; p < lattice_.Size(); p++)
  {
    const LatticeIndex k = lattice_.Index(p);
    out.data_[p] = (data_[p] - std::conj((*this)[Negate(k)])) / cplx(0.0, 2.0);
  }
  return out;
}

double FourierSeries::AbsSum() const
{
  double s = 0.0;
  for (const auto &c : data_)
  {
    s += std::abs(c);
  }
  return s;
}

double FourierSeries::MeanSquare() const
{
  double s = 0.0;
  for (const auto &c : data_)
  {
    s += std::norm(c);
  }
  return s;
}

double FourierSeries::IntegrateProduct(const FourierSeries &g) const
{
  // int f g = (2pi)^d sum_k f(k) g(-k); real for real-valued f, g.
  cplx s = 0.0;
  for (int p = 0; p < lattice_.Size(); p++)
  {
    s += data_[p] * g[Negate(lattice_.Index(p))];
  }
  return std::pow(kTwoPi, Dimension()) * s.real();
}

FourierSeries &FourierSeries::operator+=(const FourierSeries &other)
{
  Require(other.Dimension() == Dimension(), ErrorCode::BadShape, "dimension mismatch");
  if (other.Cutoff() > Cutoff())
  {
    *this = Truncated(other.Cutoff());
  }
  for (int p = 0; p < other.lattice_.Size(); p++)
  {
    data_[lattice_.Position(other.lattice_.Index(p))] += other.data_[p];
  }
  return *this;
}

FourierSeries &FourierSeries::operator*=(double s)
{
  for (auto &c : data_)
  {
    c *= s;
  }
  return *this;
}

FourierSeries Multiply(const FourierSeries &a, const FourierSeries &b)
{
  Require(a.Dimension() == b.Dimension(), ErrorCode::BadShape, "dimension mismatch");
  FourierSeries out(a.Dimension(), a.Cutoff() + b.Cutoff());
  const auto &la = a.Lattice();
  const auto &lb = b.Lattice();
  for (int p = 0; p < la.Size(); p++)
  {
    const cplx ca = a.Data()[p];
    if (ca == cplx(0.0))
    {
      continue;
    }
    const LatticeIndex ka = la.Index(p);
    for (int q = 0; q < lb.Size(); q++)
    {
      out.At(ka + lb.Index(q)) += ca * b.Data()[q];
    }
  }
  return out;
}

FourierMatrixTable::FourierMatrixTable(int dim, int cutoff)
  : lattice_(dim, cutoff), data_(lattice_.Size() * dim * dim, cplx(0.0))
{
}

cplx FourierMatrixTable::Get(const LatticeIndex &k, int l, int m) const
{
  const int p = lattice_.Position(k);
  const int d = Dimension();
  return p < 0 ? cplx(0.0) : data_[(p * d + l) * d + m];
}

void FourierMatrixTable::Set(const LatticeIndex &k, int l, int m, cplx value)
{
  const int p = lattice_.Position(k);
  Require(p >= 0, ErrorCode::BadShape, "mode outside table cutoff");
  const int d = Dimension();
  data_[(p * d + l) * d + m] = value;
}

CMatrix FourierMatrixTable::Mode(const LatticeIndex &k) const
{
  const int d = Dimension();
  CMatrix out(d, d);
  for (int l = 0; l < d; l++)
  {
    for (int m = 0; m < d; m++)
    {
      out(l, m) = Get(k, l, m);
    }
  }
  return out;
}

void FourierMatrixTable::SetMode(const LatticeIndex &k, const CMatrix &value)
{
  const int d = Dimension();
  Require(value.rows() == d && value.cols() == d, ErrorCode::BadShape,
          "mode matrix must be d x d");
  for (int l = 0; l < d; l++)
  {
    for (int m = 0; m < d; m++)
    {
      Set(k, l, m, value(l, m));
    }
  }
}

FourierSeries FourierMatrixTable::Entry(int l, int m) const
{
  FourierSeries s(Dimension(), Cutoff());
  for (int p = 0; p < lattice_.Size(); p++)
  {
    s.Data()[p] = Get(lattice_.Index(p), l, m);
  }
  return s;
}

void FourierMatrixTable::SetEntry(int l, int m, const FourierSeries &s)
{
  Require(s.Cutoff() <= Cutoff(), ErrorCode::BadShape, "entry series exceeds table cutoff");
  for (int p = 0; p < s.Lattice().Size(); p++)
  {
    Set(s.Lattice().Index(p), l, m, s.Data()[p]);
  }
}

}  // namespace blochkit
