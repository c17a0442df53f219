// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_PLANEWAVE_HPP
#define BLOCHKIT_PLANEWAVE_HPP

#include <vector>

#include "blochkit/coeff_field.hpp"
#include "blochkit/fourier.hpp"

namespace blochkit
{

// Trial space spanned by exp(i k.y)/(2pi)^(d/2), |k|_inf <= K, in
// lexicographic order.
class PlanewaveBasis
{
public:
  PlanewaveBasis(int dim, int cutoff);

  int Dimension() const { return lattice_.Dimension(); }
  int Cutoff() const { return lattice_.Cutoff(); }
  int Size() const { return lattice_.Size(); }
  const ModeLattice &Lattice() const { return lattice_; }
  const LatticeIndex &Index(int i) const { return indices_[i]; }
  int Position(const LatticeIndex &k) const { return lattice_.Position(k); }
  // Position of k = 0.
  int Origin() const { return lattice_.Position({0, 0}); }

private:
  ModeLattice lattice_;
  std::vector<LatticeIndex> indices_;
};

// How the coefficient enters the Galerkin matrix. Laurent is the direct
// product rule (k+eta)^T A^(k-k') (k'+eta). Inverse (1D only) uses
// D T^{-1} D with T the Toeplitz matrix of the coefficients of 1/a, which
// converges fast for coefficients with jumps.
enum class FactorizationRule
{
  Laurent,
  Inverse
};

struct FiberMatrix
{
  RVector eta;           // reduced quasimomentum in [-1/2, 1/2)^d
  LatticeIndex shift{};  // integer vector subtracted during the reduction
  CMatrix h;
};

// Reduces eta mod 1 into [-1/2, 1/2)^d. The subtracted integer vector is
// written to shift when given.
RVector ReduceToDualCell(const RVector &eta, LatticeIndex *shift = nullptr);

// Periodic sup-distance between two quasimomenta.
double PeriodicDistance(const RVector &a, const RVector &b);

FiberMatrix AssembleFiber(const MatrixField &field, const PlanewaveBasis &basis,
                          const RVector &eta);
FiberMatrix AssembleFiber(const CoefficientField &field, const PlanewaveBasis &basis,
                          const RVector &eta, FactorizationRule rule);

// Fiber at the literal quasimomentum without reduction. Used when
// eigenvectors must be compared across the dual-cell boundary.
FiberMatrix AssembleFiberAt(const CoefficientField &field, const PlanewaveBasis &basis,
                            const RVector &eta,
                            FactorizationRule rule = FactorizationRule::Laurent);

// Smallest n values of |k+eta|^2 over the basis, ascending.
std::vector<double> ShiftedLaplacianEigs(const PlanewaveBasis &basis, const RVector &eta, int n);

// M_{k,k'} = phi^(k-k'). Modes of phi beyond 2K are dropped; their count is
// written to truncated when given.
CMatrix MultiplicationMatrix(const FourierSeries &phi, const PlanewaveBasis &basis,
                             int *truncated = nullptr);

// i (k_j + eta_j) u^(k).
CVector GradientVector(const CVector &u, const PlanewaveBasis &basis, const RVector &eta, int j);

// Periodic function sum_k u(k) exp(i k.y)/(2pi)^(d/2) as a Fourier series.
FourierSeries ToSeries(const CVector &u, const PlanewaveBasis &basis);

}  // namespace blochkit

#endif  // BLOCHKIT_PLANEWAVE_HPP
