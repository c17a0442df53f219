// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_FOURIER_HPP
#define BLOCHKIT_FOURIER_HPP

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace blochkit
{

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// Lattice index in Z^d, d <= 2. Unused trailing components are zero.
using LatticeIndex = std::array<int, 2>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline LatticeIndex operator-(const LatticeIndex &a, const LatticeIndex &b)
{
  return {a[0] - b[0], a[1] - b[1]};
}

inline LatticeIndex operator+(const LatticeIndex &a, const LatticeIndex &b)
{
  return {a[0] + b[0], a[1] + b[1]};
}

inline LatticeIndex Negate(const LatticeIndex &a) { return {-a[0], -a[1]}; }

// Cube {k in Z^d : |k|_inf <= cutoff} in lexicographic order (first axis
// slowest).
class ModeLattice
{
public:
  ModeLattice() = default;
  ModeLattice(int dim, int cutoff);

  int Dimension() const { return dim_; }
  int Cutoff() const { return cutoff_; }
  int Size() const { return size_; }
  int Side() const { return 2 * cutoff_ + 1; }

  bool Contains(const LatticeIndex &k) const;
  // Flat position of k, or -1 when k lies outside the cube.
  int Position(const LatticeIndex &k) const;
  LatticeIndex Index(int pos) const;

private:
  int dim_ = 1;
  int cutoff_ = 0;
  int size_ = 1;
};

// Scalar periodic function on [0,2pi)^d stored by Fourier coefficients:
// f(y) = sum_k c(k) exp(i k.y).
class FourierSeries
{
public:
  FourierSeries() = default;
  FourierSeries(int dim, int cutoff);

  static FourierSeries Constant(int dim, double value);

  const ModeLattice &Lattice() const { return lattice_; }
  int Dimension() const { return lattice_.Dimension(); }
  int Cutoff() const { return lattice_.Cutoff(); }

  // Zero outside the stored cube.
  cplx operator[](const LatticeIndex &k) const;
  cplx &At(const LatticeIndex &k);
  const std::vector<cplx> &Data() const { return data_; }
  std::vector<cplx> &Data() { return data_; }

  cplx Evaluate(const RVector &y) const;
  // Copy restricted (or zero-padded) to a new cutoff.
  FourierSeries Truncated(int cutoff) const;
  // Real part of the function, i.e. coefficients (c(k) + conj(c(-k)))/2.
  FourierSeries RealPart() const;
  FourierSeries ImagPart() const;
  // Sum of |c(k)|, an upper bound of the sup norm.
  double AbsSum() const;
  // Squared L2 norm over one cell divided by (2pi)^d.
  double MeanSquare() const;
  // Integral over one cell of this * g for real-valued functions.
  double IntegrateProduct(const FourierSeries &g) const;
  FourierSeries &operator+=(const FourierSeries &other);
  FourierSeries &operator*=(double s);

private:
  ModeLattice lattice_;
  std::vector<cplx> data_;
};

// Product of two trigonometric polynomials (full convolution, no truncation).
FourierSeries Multiply(const FourierSeries &a, const FourierSeries &b);

// d x d complex Fourier coefficients of a matrix field on the cube.
class FourierMatrixTable
{
public:
  FourierMatrixTable() = default;
  FourierMatrixTable(int dim, int cutoff);

  const ModeLattice &Lattice() const { return lattice_; }
  int Dimension() const { return lattice_.Dimension(); }
  int Cutoff() const { return lattice_.Cutoff(); }

  cplx Get(const LatticeIndex &k, int l, int m) const;
  void Set(const LatticeIndex &k, int l, int m, cplx value);
  CMatrix Mode(const LatticeIndex &k) const;
  void SetMode(const LatticeIndex &k, const CMatrix &value);

  // Entry (l,m) as a scalar series.
  FourierSeries Entry(int l, int m) const;
  void SetEntry(int l, int m, const FourierSeries &s);

  // Raw storage: entry (l,m) of mode p at index (p*d + l)*d + m.
  const std::vector<cplx> &Data() const { return data_; }

private:
  ModeLattice lattice_;
  std::vector<cplx> data_;
};

}  // namespace blochkit

#endif  // BLOCHKIT_FOURIER_HPP
