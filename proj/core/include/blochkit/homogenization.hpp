// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_HOMOGENIZATION_HPP
#define BLOCHKIT_HOMOGENIZATION_HPP

#include <functional>
#include <vector>

#include "blochkit/bloch_spectrum.hpp"
#include "blochkit/coeff_field.hpp"
#include "blochkit/edge_model.hpp"
#include "blochkit/planewave.hpp"

namespace blochkit
{

// Sweep parameters. Every shifted spectral parameter lambda0 - eps^2 kappa^2
// must lie inside the open gap (gap_lower, gap_upper).
struct HomogParams
{
  std::vector<double> epsilons;  // positive, strictly descending
  double kappa = 1.0;
  double lambda0 = 0.0;
  double gap_lower = 0.0;
  double gap_upper = 0.0;
};

// Throws InvalidArgument naming the violated condition.
void ValidateHomogParams(const HomogParams &params);

// One edge point of the effective operator: quasimomentum eta_j, quadratic
// form B_j (half Hessian) and the edge eigenvector phi_j in planewave
// coefficients (unit norm).
struct EffectiveBranch
{
  RVector eta;
  RMatrix b;
  CVector phi;
};

struct EffectiveResolventSpec
{
  std::vector<EffectiveBranch> branches;
};

// Spec from a certified simple edge: one branch per edge point with the
// eigenvector of band m there and the finite-difference edge model.
EffectiveResolventSpec BuildEdgeSpec(const CoefficientField &field, const PlanewaveBasis &basis,
                                     const SpectralEdgeReport &report,
                                     const EdgeModelOptions &opts = {},
                                     std::vector<EdgeModel> *models = nullptr);

// Same spec with every B_j multiplied by factor.
EffectiveResolventSpec ScaleHessians(const EffectiveResolventSpec &spec, double factor);

// (h - z)^{-1} through a Hermitian eigendecomposition. Throws NearSingular
// when z is within 1e-8 of the spectrum and SolverFailure when the residual
// |(h - z) X - I| exceeds 1e-8.
CMatrix ResolventFromMatrix(const CMatrix &h, double z);

// S(eps) = (A(eta) - (lambda0 - eps^2 kappa^2))^{-1}.
CMatrix ExactResolventFiber(const CoefficientField &field, const PlanewaveBasis &basis,
                            const RVector &eta, double lambda0, double eps, double kappa,
                            FactorizationRule rule = FactorizationRule::Laurent);

// sum_j M_j diag(((k + eta - eta_j)^T B_j (k + eta - eta_j) + eps^2 kappa^2)^{-1}) M_j^H
// with M_j the Toeplitz matrix of the coefficients of phi_j. The cell volume
// and the basis normalization cancel.
CMatrix EffectiveResolventFiber(const EffectiveResolventSpec &spec, const PlanewaveBasis &basis,
                                const RVector &eta, double eps, double kappa);

struct LogLogFit
{
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // root mean square of the fit residuals
  double ci_low = 0.0;    // 95% confidence interval of the slope
  double ci_high = 0.0;
};

// Least-squares line through (log x, log y).
LogLogFit FitLogLog(const std::vector<double> &x, const std::vector<double> &y);

// Evaluation points: grid nodes followed by probes
// eta_j + eps kappa s v / sqrt(v^T B_j v) for s in {1/4, 1/2, 1, 2, 4} and v
// along the axes and diagonals in both orientations.
std::vector<RVector> SweepPoints(const BrillouinGrid &grid,
                                 const std::vector<EffectiveBranch> &branches, double eps,
                                 double kappa, bool probes);

struct SweepRow
{
  double epsilon = 0.0;
  double scaled_norm = 0.0;  // sup |S - S0|
  double r_norm = 0.0;       // eps^2 * scaled_norm
  RVector argmax;
  double coarse_grid_norm = 0.0;  // same on the M/2 grid
  double coarse_basis_norm = -1.0;  // same with cutoff K/2, -1 when not computed
};

struct ComparisonReport
{
  std::vector<SweepRow> rows;
  LogLogFit fit;  // of r_norm against eps
  double kappa = 0.0;
  int cutoff = 0;
  int grid_points = 0;
};

struct SweepOptions
{
  int threads = 1;
  bool probes = true;
  bool coarse_grid = true;
  FactorizationRule rule = FactorizationRule::Laurent;
  // Rebuilds the spec for the K/2 basis; the diagnostic is skipped when empty.
  std::function<EffectiveResolventSpec(const PlanewaveBasis &)> coarse_spec;
};

// sup over the evaluation points of |S(eps) - S0(eps)| for every eps.
ComparisonReport NormDifferenceSweep(const CoefficientField &field,
                                     const EffectiveResolventSpec &spec,
                                     const PlanewaveBasis &basis, const BrillouinGrid &grid,
                                     const HomogParams &params, const SweepOptions &opts = {});

struct KlmnReport
{
  double q = 0.0;  // |(a + bH)(H - zeta)^{-1}|
  bool hypothesis2 = false;
  double lhs = 0.0;  // |(K - zeta)^{-1} - (H - zeta)^{-1}|
  double rhs = 0.0;  // 4q/(1-q)^2 |(H - zeta)^{-1}|
  bool holds = false;
};

// Checks the resolvent-continuity estimate for a form-bounded perturbation
// K of H. lhs and rhs are only evaluated when hypothesis2 holds.
KlmnReport KlmnBoundCheck(const CMatrix &h, const CMatrix &k, double a, double b, double zeta);

// Edge branches of a perturbed field followed analytically from the cluster
// at eta0: minimizer, value, half Hessian and eigenvector per branch.
struct PerturbedEdge
{
  std::vector<EffectiveBranch> branches;
  std::vector<double> values;
  double lambda0 = 0.0;  // min over branches
};

// reference holds one column per branch (analytic labels at eta0).
PerturbedEdge TrackPerturbedEdge(const CoefficientField &perturbed, const PlanewaveBasis &basis,
                                 const RVector &eta0, const CMatrix &reference, int first_band,
                                 double half_width, double fd_step = 1e-3);

struct PerturbedRow
{
  double epsilon = 0.0;
  double t = 0.0;
  double lambda0_tilde = 0.0;
  double s_diff = 0.0;          // sup |S - S~|
  double per_eps_bound = 0.0;   // 4(1 + 2 c3 e^2 k^2)/(k^2 (1 - e^2 - 2 c3 e^4 k^2)^2)
  double uniform_bound = 0.0;   // 16(1 + c3 k^2)/(k^2 (1 - c3 k^2)^2)
  bool bound_holds = false;
  double s_tilde_diff = 0.0;    // sup |S~ - S~0|
  double combined = 0.0;        // sup |S - S~0|
  double combined_r = 0.0;      // eps^2 * combined
};

struct PerturbedReport
{
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double kappa = 0.0;
  double probe_t = 0.0;
  std::vector<PerturbedRow> rows;
  LogLogFit fit;  // of combined_r against eps
  bool uniform_ok = false;
  // Slope of combined_r with t scaled by 0.5 and 1.5.
  double slope_half_t = 0.0;
  double slope_one_and_half_t = 0.0;
};

struct PerturbedSetup
{
  CoefficientField a;
  PerturbationField b;
  RVector eta0;
  double lambda0 = 0.0;
  Cluster cluster;  // edge cluster of A at eta0
};

struct PerturbedOptions
{
  int threads = 1;
  double probe_t = -1.0;  // step used to measure c1; <= 0 selects sigma0 / 1000
  double half_width = 0.05;
  bool sensitivity = true;
  bool probes = true;
};

// Couples t = eps^4 kappa^2 / c1 and compares S, S~ and the multi-branch
// effective resolvent S~0 over grid and probe points.
PerturbedReport PerturbedComparison(const PerturbedSetup &setup, const PlanewaveBasis &basis,
                                    const BrillouinGrid &grid, const HomogParams &params,
                                    const PerturbedOptions &opts = {});

struct ProjectionSplitRow
{
  double epsilon = 0.0;
  double s_fperp = 0.0;     // sup |S~ F_perp|
  double s0_fperp = 0.0;    // sup |S~0 F_perp|
  double scaled_f_diff = 0.0;  // eps * sup |S~ F - S~0 F|
};

// F projects onto bands [band, band + count) at the nodes of the
// neighbourhood and vanishes elsewhere.
std::vector<ProjectionSplitRow> ProjectionSplitNorms(
    const CoefficientField &field, const EffectiveResolventSpec &spec, const PlanewaveBasis &basis,
    const BrillouinGrid &grid, const std::vector<int> &neighborhood, int band, int count,
    const HomogParams &params, int threads = 1);

struct RoundtripReport
{
  double roundtrip_error = 0.0;  // relative L2
  double parseval_defect = 0.0;  // relative
  double norm_squared = 0.0;
  // |coefficient|^2 Delta eta per (node, band), nodes of the L-point grid.
  RMatrix energy;
};

// Bloch coefficients of g sampled on the box [0, 2 pi L)^d with (2K+1) L
// samples per axis (first axis fastest), followed by the inverse transform.
// L must be even.
RoundtripReport BlochTransformRoundtrip(const std::vector<cplx> &samples, int cells,
                                        const CoefficientField &field,
                                        const PlanewaveBasis &basis);

}  // namespace blochkit

#endif  // BLOCHKIT_HOMOGENIZATION_HPP
