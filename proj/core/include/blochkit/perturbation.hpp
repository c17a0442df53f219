// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_PERTURBATION_HPP
#define BLOCHKIT_PERTURBATION_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "blochkit/bloch_spectrum.hpp"
#include "blochkit/coeff_field.hpp"
#include "blochkit/planewave.hpp"

namespace blochkit
{

// First-order matrix of B on a degenerate cluster: G = U^H H_B(eta) U, so
// G[m][n] is the form of B evaluated on (u_n, u_m).
struct SplittingMatrix
{
  RVector eta;
  int h = 0;
  CMatrix g;
  CMatrix basis;  // cluster vectors used, one per column
};

SplittingMatrix BuildSplittingMatrix(const PerturbationField &b, const PlanewaveBasis &basis,
                                     const RVector &eta, const CMatrix &cluster_vectors);

// Eigenvalues of G ascending: the t-derivatives of the cluster branches.
RVector FirstOrderSlopes(const SplittingMatrix &g);

double Spread(const RVector &slopes);

struct PlanTarget
{
  RVector eta;
  double lambda0 = 0.0;
  int first_band = 0;
  int h = 0;
  RVector slopes;      // first-order slopes of B on the cluster
  double spread = 0.0;  // max slope - min slope
};

struct PlanStep
{
  PerturbationField b;  // unit sup norm
  double t = 0.0;
  int max_h_before = 0;
  int max_h_after = 0;
  int attempts = 0;
};

// A perturbation direction with its admissible and recommended steps. The
// perturbed field is A + sign * t * b.
struct PerturbationPlan
{
  PerturbationField b;
  int sign = 1;
  double sigma0 = 0.0;
  double t0 = 0.0;
  double t_lin = 0.0;  // largest tested t keeping the linear splitting bound
  double containment_radius = 0.1;
  std::string construction;  // which alternative produced b
  std::vector<PlanTarget> targets;
  std::vector<PlanStep> steps;  // iterated constructions only
  double budget_used = 0.0;
  double budget = 0.0;
};

// JSON document with the B modes, sigma0, t0, targets and predicted spreads.
std::string PlanDocument(const PerturbationPlan &plan);

struct SplitOptions
{
  int b_cutoff = 2;
  double cluster_tol = -1.0;  // <= 0: DefaultClusterTol(lambda0)
  double tol = 1e-10;         // threshold for a vanishing product function
};

// Diagonal B splitting the cluster (h >= 2) at eta to first order, normalized
// to unit sup norm. Throws InvalidArgument for h < 2 and DegenerateCluster
// when every candidate product function vanishes.
PerturbationPlan ConstructSplittingB(const CoefficientField &a, const PlanewaveBasis &basis,
                                     const RVector &eta, const Cluster &cluster,
                                     const SplitOptions &opts = {});

struct SplitTarget
{
  RVector eta;
  double lambda0 = 0.0;
};

struct MultiPointOptions
{
  int b_cutoff = 2;
  std::uint64_t seed = 0;
  int max_retries = 32;
  double accept_tol = 1e-3;
  double eps_budget = -1.0;  // <= 0: 0.01 alpha
  int max_iterations = 8;
  double cluster_tol = -1.0;
  double tol = 1e-10;
};

// One scalar B = beta I that makes every target simple, iterating when a
// single step leaves residual multiplicity. b holds the accumulated
// perturbation normalized to unit sup norm and t0 its scale. Throws
// RetriesExhausted when no admissible beta is found or the budget runs out.
PerturbationPlan ConstructMultiPointB(const CoefficientField &a, const PlanewaveBasis &basis,
                                      const std::vector<SplitTarget> &targets,
                                      const MultiPointOptions &opts = {});

struct RellichBranch
{
  std::vector<double> t;
  std::vector<double> values;
  std::vector<double> overlaps;  // overlap accepted on arrival at each t
  double slope = 0.0;            // derivative at t = 0
};

struct BranchWindow
{
  double lo = 0.0;
  double hi = 0.0;
};

// Window around a cluster reaching halfway to the neighbouring eigenvalues.
BranchWindow DefaultWindow(const EigenPairs &pairs, const Cluster &cluster);

// Branches of h_a + t h_b through the cluster at t = 0, matched by maximal
// eigenvector overlap. Steps whose best overlap is below 0.6 are halved up
// to 8 times before BranchCollision. WindowBreach when the number of
// eigenvalues inside the window differs from the cluster size. Branches are
// returned in the order of their first-order slopes.
std::vector<RellichBranch> TrackBranches(const CMatrix &h_a, const CMatrix &h_b,
                                         const CMatrix &cluster_vectors,
                                         const std::vector<double> &t_grid,
                                         const BranchWindow &window);

std::vector<RellichBranch> TrackBranches(const CoefficientField &a, const PerturbationField &b,
                                         const PlanewaveBasis &basis, const RVector &eta,
                                         const Cluster &cluster, const std::vector<double> &t_grid,
                                         const BranchWindow &window);

struct ContainmentEntry
{
  double t = 0.0;
  double lambda0 = 0.0;     // perturbed grid edge value
  double shift = 0.0;       // |lambda0(A + tB) - lambda0(A)|
  double shift_bound = 0.0;  // d * max c_m * |B| * |t|
  std::vector<RVector> minimizers;
  std::vector<RVector> escaping;
  bool contained = true;
  bool shift_ok = true;
};

struct ContainmentReport
{
  double delta = 0.0;
  std::vector<ContainmentEntry> entries;
  bool all_contained = true;
};

// Extremizer nodes of band m (minima for an upper edge, maxima for a lower
// one) of A + tB on the grid for every t, checked against the edge points.
ContainmentReport EdgeContainmentCheck(const CoefficientField &a, const PerturbationField &b,
                                       const PlanewaveBasis &basis, const BrillouinGrid &grid,
                                       int band, EdgeSide side, const std::vector<double> &t_list,
                                       const std::vector<RVector> &edge_points, double delta,
                                       int threads = 1);

struct FiberedCell
{
  std::vector<int> nodes;
  PerturbationField b;
  double t = 0.0;
  int seed_node = -1;  // -1 for the unperturbed cell
};

struct FiberedPlan
{
  int band = 0;
  std::vector<FiberedCell> cells;
  std::vector<int> node_cell;     // cell index per grid node
  std::vector<double> node_gap;   // distance from band m to its neighbours
  double cluster_tol = 0.0;
  bool certified = false;
};

// Band m is simple at a node when both neighbouring eigenvalues are more than
// cluster_tol away.
bool BandSimpleAt(const RVector &values, int band, double cluster_tol, double *gap = nullptr);

// Disjoint cover of the grid by cells with their own B: one unperturbed cell
// for every node where band m is already simple and one cell per splitting
// construction over degenerate nodes. Throws CoverFailure when a degenerate
// node cannot be split.
FiberedPlan FiberedGlobalPerturbation(const CoefficientField &a, const PlanewaveBasis &basis,
                                      const BrillouinGrid &grid, int band, int b_cutoff,
                                      int threads = 1);

struct EdgeSplitRow
{
  double t = 0.0;
  double lambda_m = 0.0;      // lambda_m(eta_hat; A - tB)
  double bound_m = 0.0;       // lambda0 - 7 theta t / 12
  double min_lambda_m1 = 0.0;  // min over the grid of lambda_{m+1}(.; A - tB)
  double bound_m1 = 0.0;       // lambda0 - 5 theta t / 12
  bool holds = false;
};

struct EdgeSplitResult
{
  PerturbationPlan plan;  // sign = -1
  int band = 0;           // m
  RVector y0;
  int direction = 0;  // l, 0-based
  double theta = 0.0;
  double eps0 = 0.0;          // radius where both continuity conditions hold
  double mass_inside = 0.0;   // bump mass within eps0 of y0
  double bump_integral = 0.0;
  std::vector<EdgeSplitRow> rows;
  bool verified = false;
};

struct EdgeSplitOptions
{
  int scan_points = 0;  // per axis; 0 selects max(64, 8 (2K+1))
  int shifts = 3;
  int t_per_decade = 4;
  double tol = 1e-12;
  int threads = 1;
};

// Splits a doubly degenerate edge at eta_hat with A - tB, where B carries a
// nonnegative unit-mass raised-cosine bump of order bump_cutoff in slot l
// centred at the point of largest cluster gradient. Throws NoBumpSite and
// VerificationFailed.
EdgeSplitResult EdgeSplitW1Inf(const CoefficientField &a, const PlanewaveBasis &basis,
                               const BrillouinGrid &grid, const RVector &eta_hat, double lambda0,
                               int bump_cutoff, const EdgeSplitOptions &opts = {});

// Nonnegative bump ((1 + cos(y - y0))/2)^p per axis with unit integral.
FourierSeries RaisedCosineBump(const RVector &y0, int p);

}  // namespace blochkit

#endif  // BLOCHKIT_PERTURBATION_HPP
