// SPDX-License-Identifier: Apache-2.0

#include "blochkit/planewave.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "blochkit/errors.hpp"

namespace blochkit
{

PlanewaveBasis::PlanewaveBasis(int dim, int cutoff) : lattice_(dim, cutoff)
{
  indices_.reserve(lattice_.Size());
  for (int p = 0; p < lattice_.Size(); p++)
  {
    indices_.push_back(lattice_.Index(p));
  }
}

RVector ReduceToDualCell(const RVector &eta, LatticeIndex *shift)
{
  RVector out = eta;
  LatticeIndex s{0, 0};
  for (int i = 0; i < eta.size(); i++)
  {
    const double n = std::floor(eta(i) + 0.5);
    out(i) = eta(i) - n;
    // Guard the right endpoint against rounding.
    if (out(i) >= 0.5)
    {
      out(i) -= 1.0;
    }
    s[i] = static_cast<int>(n);
  }
  if (shift)
  {
    *shift = s;
  }
  return out;
}

double PeriodicDistance(const RVector &a, const RVector &b)
{
  double dist = 0.0;
  for (int i = 0; i < a.size(); i++)
  {
    const double diff = a(i) - b(i);
    dist = std::max(dist, std::abs(diff - std::round(diff)));
  }
  return dist;
}

namespace
{

RVector Reduce(const RVector &eta, LatticeIndex &shift)
{
  RVector reduced = ReduceToDualCell(eta, &shift);
  if (shift[0] != 0 || shift[1] != 0)
  {
    spdlog::debug("quasimomentum reduced into the dual cell by ({}, {})", shift[0], shift[1]);
  }
  return reduced;
}

void HermitianSymmetrize(CMatrix &h) { h = 0.5 * (h + h.adjoint()).eval(); }

FiberMatrix LaurentAt(const MatrixField &field, const PlanewaveBasis &basis, const RVector &eta)
{
  const int d = basis.Dimension();
  Require(field.Dimension() == d && eta.size() == d, ErrorCode::BadShape,
          "field, basis and quasimomentum dimensions differ");
  FiberMatrix fm;
  fm.eta = eta;
  const int n = basis.Size();
  // q(k) = k + eta for every basis index.
  RMatrix q(d, n);
  for (int i = 0; i < n; i++)
  {
    for (int l = 0; l < d; l++)
    {
      q(l, i) = basis.Index(i)[l] + fm.eta(l);
    }
  }
  const auto &table = field.Coefficients();
  const auto &lat = table.Lattice();
  const auto &data = table.Data();
  fm.h = CMatrix::Zero(n, n);
  for (int i = 0; i < n; i++)
  {
    const LatticeIndex &ki = basis.Index(i);
    for (int j = 0; j < n; j++)
    {
      const int p = lat.Position(ki - basis.Index(j));
      if (p < 0)
      {
        continue;
      }
      cplx acc = 0.0;
      for (int l = 0; l < d; l++)
      {
        for (int m = 0; m < d; m++)
        {
          acc += q(l, i) * data[(p * d + l) * d + m] * q(m, j);
        }
      }
      fm.h(i, j) = acc;
    }
  }
  HermitianSymmetrize(fm.h);
  return fm;
}

FiberMatrix InverseAt(const CoefficientField &field, const PlanewaveBasis &basis,
                      const RVector &eta)
{
  Require(basis.Dimension() == 1 && field.Dimension() == 1, ErrorCode::BadShape,
          "inverse factorization is implemented for 1D fields only");
  FiberMatrix fm;
  fm.eta = eta;
  const int n = basis.Size();
  const FourierSeries inv = field.ReciprocalCoefficients(2 * basis.Cutoff());
  CMatrix toeplitz(n, n);
  for (int i = 0; i < n; i++)
  {
    for (int j = 0; j < n; j++)
    {
      toeplitz(i, j) = inv[basis.Index(i) - basis.Index(j)];
    }
  }
  // T is Hermitian positive definite because 1/a > 0.
  const CMatrix tinv = toeplitz.ldlt().solve(CMatrix::Identity(n, n));
  fm.h.resize(n, n);
  for (int i = 0; i < n; i++)
  {
    const double qi = basis.Index(i)[0] + fm.eta(0);
    for (int j = 0; j < n; j++)
    {
      fm.h(i, j) = qi * tinv(i, j) * (basis.Index(j)[0] + fm.eta(0));
    }
  }
  HermitianSymmetrize(fm.h);
  return fm;
}

}  // namespace

FiberMatrix AssembleFiber(const MatrixField &field, const PlanewaveBasis &basis,
                          const RVector &eta)
{
  LatticeIndex shift;
  const RVector reduced = Reduce(eta, shift);
  FiberMatrix fm = LaurentAt(field, basis, reduced);
  fm.shift = shift;
  return fm;
}

FiberMatrix AssembleFiber(const CoefficientField &field, const PlanewaveBasis &basis,
                          const RVector &eta, FactorizationRule rule)
{
  LatticeIndex shift;
  const RVector reduced = Reduce(eta, shift);
  FiberMatrix fm = AssembleFiberAt(field, basis, reduced, rule);
  fm.shift = shift;
  return fm;
}

FiberMatrix AssembleFiberAt(const CoefficientField &field, const PlanewaveBasis &basis,
                            const RVector &eta, FactorizationRule rule)
{
  return rule == FactorizationRule::Laurent ? LaurentAt(field, basis, eta)
                                            : InverseAt(field, basis, eta);
}

std::vector<double> ShiftedLaplacianEigs(const PlanewaveBasis &basis, const RVector &eta, int n)
{
  Require(n >= 0 && n <= basis.Size(), ErrorCode::InvalidArgument,
          "requested more eigenvalues than basis functions");
  std::vector<double> vals(basis.Size());
  for (int i = 0; i < basis.Size(); i++)
  {
    double s = 0.0;
    for (int l = 0; l < basis.Dimension(); l++)
    {
      const double q = basis.Index(i)[l] + eta(l);
      s += q * q;
    }
    vals[i] = s;
  }
  std::sort(vals.begin(), vals.end());
  vals.resize(n);
  return vals;
}

CMatrix MultiplicationMatrix(const FourierSeries &phi, const PlanewaveBasis &basis,
                             int *truncated)
{
  Require(phi.Dimension() == basis.Dimension(), ErrorCode::BadShape, "dimension mismatch");
  const int n = basis.Size();
  if (truncated)
  {
    const ModeLattice keep(basis.Dimension(), 2 * basis.Cutoff());
    int dropped = 0;
    for (int p = 0; p < phi.Lattice().Size(); p++)
    {
      if (!keep.Contains(phi.Lattice().Index(p)) && phi.Data()[p] != cplx(0.0))
      {
        dropped++;
      }
    }
    *truncated = dropped;
  }
  CMatrix m(n, n);
  for (int i = 0; i < n; i++)
  {
    for (int j = 0; j < n; j++)
    {
      m(i, j) = phi[basis.Index(i) - basis.Index(j)];
    }
  }
  return m;
}

CVector GradientVector(const CVector &u, const PlanewaveBasis &basis, const RVector &eta, int j)
{
  Require(u.size() == basis.Size(), ErrorCode::BadShape, "vector length differs from basis");
  CVector out(u.size());
  for (int i = 0; i < basis.Size(); i++)
  {
    out(i) = cplx(0.0, basis.Index(i)[j] + eta(j)) * u(i);
  }
  return out;
}

FourierSeries ToSeries(const CVector &u, const PlanewaveBasis &basis)
{
  FourierSeries s(basis.Dimension(), basis.Cutoff());
  const double norm = std::pow(kTwoPi, -0.5 * basis.Dimension());
  for (int i = 0; i < basis.Size(); i++)
  {
    s.At(basis.Index(i)) = norm * u(i);
  }
  return s;
}

}  // namespace blochkit
