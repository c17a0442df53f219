// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_BLOCH_SPECTRUM_HPP
#define BLOCHKIT_BLOCH_SPECTRUM_HPP

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "blochkit/coeff_field.hpp"
#include "blochkit/planewave.hpp"

namespace blochkit
{

// Uniform grid eta_i = -1/2 + i/M per axis on [-1/2, 1/2)^d, lexicographic.
class BrillouinGrid
{
public:
  BrillouinGrid(int dim, int points_per_axis);

  int Dimension() const { return dim_; }
  int PointsPerAxis() const { return m_; }
  int Size() const { return size_; }
  double Spacing() const { return 1.0 / m_; }

  RVector Node(int i) const;
  std::array<int, 2> Coords(int i) const;
  int FromCoords(int c0, int c1 = 0) const;
  // The 3^d - 1 periodic neighbours.
  std::vector<int> Neighbors(int i) const;
  // Node holding -eta mod 1.
  int Reflected(int i) const;
  // Coarse grid with M/2 points per axis (at least 3).
  BrillouinGrid Coarsened() const;

private:
  int dim_;
  int m_;
  int size_;
};

struct EigenPairs
{
  RVector values;   // ascending
  CMatrix vectors;  // orthonormal columns, phase-fixed
  double max_residual = 0.0;
};

// Lowest n eigenpairs of a Hermitian matrix. The largest-magnitude entry of
// every eigenvector is made real positive. Throws SolverFailure when a
// residual exceeds 1e-10 (1 + |lambda|) or orthonormality fails.
EigenPairs EigenFiber(const CMatrix &h, int n);
EigenPairs EigenFiber(const FiberMatrix &fiber, int n);
// Eigenvalues only, ascending, first n.
RVector FiberEigenvalues(const CMatrix &h, int n);

struct BandOptions
{
  int threads = 1;
  bool store_vectors = false;
  FactorizationRule rule = FactorizationRule::Laurent;
};

struct BandStructure
{
  BrillouinGrid grid{1, 3};
  int n_bands = 0;
  RMatrix values;               // nodes x bands
  std::vector<CMatrix> vectors;  // per node when stored
  RVector sigma_minus;           // per-band grid minimum
  RVector sigma_plus;            // per-band grid maximum
  double max_residual = 0.0;

  // 1-based band index.
  double Value(int node, int band) const { return values(node, band - 1); }
};

BandStructure ComputeBands(const CoefficientField &field, const PlanewaveBasis &basis,
                           const BrillouinGrid &grid, int n_bands, const BandOptions &opts = {});

struct SpectralGap
{
  double lower = 0.0;  // mu^-
  double upper = 0.0;  // mu^+
  int band_below = 0;  // 1-based index of the band below the gap
  std::vector<int> lower_nodes;
  std::vector<int> upper_nodes;

  double Width() const { return upper - lower; }
};

// Gap above band n iff sigma_plus[n] < sigma_minus[n+1] - rel_tol * max(1, sigma_plus[n]).
std::vector<SpectralGap> FindGaps(const BandStructure &bands, double rel_tol = 1e-8);

// 1e-6 * max(1, lambda0).
double DefaultClusterTol(double lambda0);

struct Cluster
{
  int h = 0;
  int first_band = 0;  // 1-based index of the lowest member
  RVector values;
  CMatrix vectors;
};

// Eigenvalues within [lambda0 - tol, lambda0 + tol]; tol <= 0 selects the
// default. Throws EmptyCluster.
Cluster ClusterFromPairs(const EigenPairs &pairs, double lambda0, double cluster_tol = -1.0);
Cluster MultiplicityAt(const CoefficientField &field, const PlanewaveBasis &basis,
                       const RVector &eta, double lambda0, double cluster_tol = -1.0,
                       FactorizationRule rule = FactorizationRule::Laurent);

struct ContinuityReport
{
  double lhs = 0.0;
  double rhs = 0.0;
  double c_n = 0.0;
  double sup_difference = 0.0;
  bool holds = false;
};

// |lambda_n(eta; A1) - lambda_n(eta; A2)| <= d c_n(eta) |A1 - A2|_inf with the
// sup norm sampled as the max absolute entry on a dense grid.
ContinuityReport CheckContinuityBound(const CoefficientField &a1, const CoefficientField &a2,
                                      const PlanewaveBasis &basis, const RVector &eta, int n);

enum class EdgeSide
{
  Lower,  // mu^-: maxima of the band below the gap
  Upper   // mu^+: minima of the band above the gap
};

struct EdgePoint
{
  RVector eta;
  double value = 0.0;
  int multiplicity = 0;
  int grid_node = -1;
  bool refined = false;
};

struct SpectralEdgeReport
{
  EdgeSide side = EdgeSide::Upper;
  double lambda0 = 0.0;
  int band = 0;  // m, 1-based
  std::vector<EdgePoint> points;
  bool simple = false;
  double delta = 0.0;  // distance to the neighbouring band across the gap
  double a = 0.0;
  double b = 0.0;
  double cluster_tol = 0.0;
};

struct EdgeOptions
{
  double cluster_tol = -1.0;
  FactorizationRule rule = FactorizationRule::Laurent;
  double refine_tol = 1e-8;
};

SpectralEdgeReport CertifyEdgeHypotheses(const CoefficientField &field,
                                         const PlanewaveBasis &basis,
                                         const BandStructure &bands, const SpectralGap &gap,
                                         EdgeSide side, const EdgeOptions &opts = {});

// Nodes that are <= (or >= when maxima) all periodic neighbours for a band.
std::vector<int> GridLocalExtrema(const BandStructure &bands, int band, bool maxima);

// CSV: header eta_1[,eta_2],lambda_1..lambda_n, values in %.17e. Lines of
// preamble are written first, each prefixed with "# ".
void WriteBandCsv(std::ostream &os, const BandStructure &bands,
                  const std::vector<std::string> &preamble = {});

}  // namespace blochkit

#endif  // BLOCHKIT_BLOCH_SPECTRUM_HPP
