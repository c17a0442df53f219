// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_COEFF_FIELD_HPP
#define BLOCHKIT_COEFF_FIELD_HPP

#include <optional>
#include <utility>
#include <vector>

#include "blochkit/fourier.hpp"

namespace blochkit
{

// Piecewise-constant 1D profile: value v_i on the i-th consecutive interval of
// [0, 2pi) with length 2pi*f_i.
struct LaminateProfile
{
  std::vector<double> values;
  std::vector<double> fractions;

  // Exact Fourier coefficient of the profile (power = 1) or of its reciprocal
  // (power = -1).
  cplx Coefficient(int k, int power = 1) const;
  double Mean() const;
  double HarmonicMean() const;
};

// Real symmetric d x d matrix field given by a truncated Fourier series. The
// stored table satisfies reality A^(-k) = conj(A^(k)) and symmetry exactly.
class MatrixField
{
public:
  MatrixField() = default;

  int Dimension() const { return table_.Dimension(); }
  int Cutoff() const { return table_.Cutoff(); }
  const FourierMatrixTable &Coefficients() const { return table_; }
  cplx Coefficient(const LatticeIndex &k, int l, int m) const { return table_.Get(k, l, m); }

  RMatrix Evaluate(const RVector &y) const;
  // Upper bound of max_y max_lm |A_lm(y)|: max_lm sum_k |A^_lm(k)|.
  double SupNorm() const { return sup_norm_; }
  // Upper bound of max_y |A(y)|_2: sum_k |A^(k)|_2.
  double OperatorNormBound() const;
  // Max over a uniform grid of max_lm |A_lm(y)|.
  double SampledMaxEntry(int points_per_axis) const;
  // Min over a uniform grid of the smallest eigenvalue of A(y).
  double SampledMinEigenvalue(int points_per_axis) const;
  bool IsZero() const;

protected:
  explicit MatrixField(FourierMatrixTable table);
  FourierMatrixTable table_;
  double sup_norm_ = 0.0;
};

// Perturbation direction B: real symmetric, no sign condition. Its smoothness
// tag is the trigonometric-polynomial order.
class PerturbationField : public MatrixField
{
public:
  PerturbationField() = default;
  // Symmetrizes the table.
  static PerturbationField FromFourier(const FourierMatrixTable &table);
  static PerturbationField Zero(int dim);
  // beta * I.
  static PerturbationField Scalar(const FourierSeries &beta);
  // Diagonal field with beta in slot j and zero elsewhere.
  static PerturbationField DiagonalSlot(const FourierSeries &beta, int dim, int j);

  int SmoothnessOrder() const { return Cutoff(); }
  PerturbationField Scaled(double s) const;
  PerturbationField Plus(const PerturbationField &other, double s = 1.0) const;

private:
  explicit PerturbationField(FourierMatrixTable table) : MatrixField(std::move(table)) {}
};

// Coercive coefficient field A with certified alpha > 0.
class CoefficientField : public MatrixField
{
public:
  CoefficientField() = default;

  double CoercivityAlpha() const { return alpha_; }
  const std::optional<LaminateProfile> &Profile() const { return profile_; }

  // Fourier coefficients of 1/a for scalar 1D fields up to the given cutoff:
  // exact for laminates, otherwise from sampling the truncated field.
  FourierSeries ReciprocalCoefficients(int cutoff) const;

  // Step bound sigma0 = alpha / (2 d |B|).
  double AdmissibleStep(const PerturbationField &b) const;

  // Samples per axis used for the coercivity certificate.
  static int ValidationPoints(int cutoff);

private:
  explicit CoefficientField(FourierMatrixTable table) : MatrixField(std::move(table)) {}
  friend CoefficientField BuildFromFourier(const FourierMatrixTable &table);
  friend CoefficientField BuildLaminate1d(const std::vector<double> &values,
                                          const std::vector<double> &fractions, int cutoff);
  double alpha_ = 0.0;
  std::optional<LaminateProfile> profile_;
};

// Averages A^(k) with its transpose and with conj(A^(-k)), then certifies
// coercivity on a max(4 Kc, 4) points-per-axis grid.
CoefficientField BuildFromFourier(const FourierMatrixTable &table);

CoefficientField BuildLaminate1d(const std::vector<double> &values,
                                 const std::vector<double> &fractions, int cutoff);

// A = a(y) I for a scalar series a.
CoefficientField BuildScalar(const FourierSeries &a);

// Separable 2D field diag(a(y1), a(y2)) from a 1D scalar profile.
CoefficientField BuildSeparable2d(const FourierSeries &a1d);

RMatrix Evaluate(const MatrixField &field, const RVector &y);

// A + t B. Throws StepTooLarge when |t| >= sigma0 and NotCoercive when the
// recertified alpha drops below alpha/2.
CoefficientField AddScaled(const CoefficientField &a, const PerturbationField &b, double t);

// Symmetrized copy of a table (transpose average, then reality average).
FourierMatrixTable Symmetrize(const FourierMatrixTable &table);

}  // namespace blochkit

#endif  // BLOCHKIT_COEFF_FIELD_HPP
