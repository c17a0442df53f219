// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_EDGE_MODEL_HPP
#define BLOCHKIT_EDGE_MODEL_HPP

#include <functional>

#include "blochkit/coeff_field.hpp"
#include "blochkit/planewave.hpp"

namespace blochkit
{

using BandEvaluator = std::function<double(const RVector &)>;

// eta -> lambda_band(eta), band 1-based. eta is not reduced to the dual cell,
// so finite-difference stencils stay on one smooth continuation of the
// truncated problem across the cell boundary.
BandEvaluator MakeBandEvaluator(const CoefficientField &field, const PlanewaveBasis &basis,
                                int band, FactorizationRule rule = FactorizationRule::Laurent);

// eta -> eigenvalue among bands [first_band - 1, first_band + count] whose
// eigenvector overlaps most with reference. Follows an analytic branch through
// crossings near the reference point. eta is used as given (no reduction to
// the dual cell) so callers keep it close to where reference was computed.
// Throws BranchCollision when the best overlap drops below min_overlap.
BandEvaluator MakeBranchEvaluator(const CoefficientField &field, const PlanewaveBasis &basis,
                                  const CVector &reference, int first_band, int count,
                                  double min_overlap = 0.5);

// Coordinate-wise golden-section search inside [guess - half_width,
// guess + half_width]^d followed by a quadratic polish. Result reduced to the
// dual cell. Throws NotLocalMin when the search runs into the cell boundary.
RVector RefineMinimizer(const BandEvaluator &eval, const RVector &guess, double half_width,
                        double tol = 1e-8);

struct HessianEstimate
{
  RMatrix b;       // half of the second-derivative matrix at step h
  RMatrix b_half;  // same at step h/2
  double error_estimate = 0.0;
  double step = 0.0;
};

// Central second differences at h and h/2. Throws StepUnstable when the
// Richardson error estimate exceeds 10% of max |B|.
HessianEstimate HessianFd(const BandEvaluator &eval, const RVector &eta, double h = 1e-3);

struct NondegeneracyResult
{
  bool nondegenerate = false;
  double min_eigenvalue = 0.0;
};

NondegeneracyResult NondegeneracyCheck(const RMatrix &b, double margin = 1e-8);

struct EdgeModel
{
  RVector eta;
  double lambda0 = 0.0;
  int band = 0;
  RMatrix b;
  double hessian_error = 0.0;
  double min_eigenvalue = 0.0;
  bool nondegenerate = false;
  double c3 = 0.0;
  double probe_radius = 0.0;
};

// max over probes in the ball of |lambda - lambda0 - dq^T B dq| / |dq|^3.
// Probes are Halton points with |dq| in [r/2, r].
double QuadraticResidual(const BandEvaluator &eval, const EdgeModel &model, double radius,
                         int n_probe);

struct EdgeModelOptions
{
  double fd_step = 1e-3;
  double probe_radius = 0.02;
  int n_probe = 16;
  double margin = 1e-8;
};

EdgeModel BuildEdgeModel(const BandEvaluator &eval, const RVector &eta, int band,
                         const EdgeModelOptions &opts = {});

// Half the Hessian of lambda_1 at eta = 0.
RMatrix HomogenizedMatrixBottom(const CoefficientField &field, const PlanewaveBasis &basis,
                                double h = 1e-3,
                                FactorizationRule rule = FactorizationRule::Laurent);

}  // namespace blochkit

#endif  // BLOCHKIT_EDGE_MODEL_HPP
