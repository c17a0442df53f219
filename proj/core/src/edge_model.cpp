// SPDX-License-Identifier: Apache-2.0

#include "blochkit/edge_model.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include "blochkit/bloch_spectrum.hpp"
#include "blochkit/errors.hpp"

namespace blochkit
{

BandEvaluator MakeBandEvaluator(const CoefficientField &field, const PlanewaveBasis &basis,
                                int band, FactorizationRule rule)
{
  Require(band >= 1 && band <= basis.Size(), ErrorCode::InvalidArgument, "band out of range");
  return [field, basis, band, rule](const RVector &eta)
  { return FiberEigenvalues(AssembleFiberAt(field, basis, eta, rule).h, band)(band - 1); };
}

BandEvaluator MakeBranchEvaluator(const CoefficientField &field, const PlanewaveBasis &basis,
                                  const CVector &reference, int first_band, int count,
                                  double min_overlap)
{
  Require(reference.size() == basis.Size(), ErrorCode::BadShape, "reference vector length");
  const int lo = std::max(0, first_band - 2);
  const int hi = std::min(basis.Size(), first_band + count);
  return [field, basis, reference, lo, hi, min_overlap](const RVector &eta)
  {
    const EigenPairs ep = EigenFiber(AssembleFiberAt(field, basis, eta), hi);
    int best = lo;
    double best_ov = -1.0;
    for (int i = lo; i < hi; i++)
    {
      const double ov = std::abs(reference.dot(ep.vectors.col(i)));
      if (ov > best_ov)
      {
        best_ov = ov;
        best = i;
      }
    }
    Require(best_ov >= min_overlap, ErrorCode::BranchCollision,
            "branch overlap " + std::to_string(best_ov) + " below threshold");
    return ep.values(best);
  };
}

namespace
{

constexpr double kInvPhi = 0.6180339887498949;

// Golden-section minimum of f on [a, b]; returns the best evaluated point.
double GoldenSection(const std::function<double(double)> &f, double a, double b, double tol,
                     double x0, double f0, double &fbest)
{
  double xbest = x0;
  fbest = f0;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol)
  {
    if (fc <= fd)
    {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    }
    else
    {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  const double mid = 0.5 * (a + b);
  const double fm = f(mid);
  for (auto [x, fx] : {std::pair{c, fc}, std::pair{d, fd}, std::pair{mid, fm}})
  {
    if (fx < fbest)
    {
      fbest = fx;
      xbest = x;
    }
  }
  return xbest;
}

double RadicalInverse(int i, int base)
{
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i > 0)
  {
    r += f * (i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

RVector RefineMinimizer(const BandEvaluator &eval, const RVector &guess, double half_width,
                        double tol)
{
  const int d = guess.size();
  RVector x = guess;
  double fx = eval(x);
  RVector width = RVector::Constant(d, half_width);
  for (int sweep = 0; sweep < 20; sweep++)
  {
    double change = 0.0;
    for (int i = 0; i < d; i++)
    {
      const double a = std::max(guess(i) - half_width, x(i) - width(i));
      const double b = std::min(guess(i) + half_width, x(i) + width(i));
      auto line = [&](double t)
      {
        RVector y = x;
        y(i) = t;
        return eval(y);
      };
      double fnew;
      const double t = GoldenSection(line, a, b, tol, x(i), fx, fnew);
      const double step = std::abs(t - x(i));
      change = std::max(change, step);
      width(i) = std::min(half_width, std::max(16.0 * step, 1e-6));
      x(i) = t;
      fx = fnew;
    }
    if (d == 1 || change < tol)
    {
      break;
    }
  }
  if ((x - guess).cwiseAbs().maxCoeff() >= half_width - 2.0 * tol)
  {
    throw Error(ErrorCode::NotLocalMin, "refinement reached the boundary of the grid cell");
  }
  // Quadratic polish per coordinate.
  const double s = std::min(1e-4, 0.5 * half_width);
  for (int i = 0; i < d; i++)
  {
    RVector xp = x, xm = x;
    xp(i) += s;
    xm(i) -= s;
    const double fp = eval(xp);
    const double fm = eval(xm);
    const double curv = fp - 2.0 * fx + fm;
    if (curv <= 0.0)
    {
      continue;
    }
    const double shift = -0.5 * s * (fp - fm) / curv;
    if (std::abs(shift) > s)
    {
      continue;
    }
    RVector xn = x;
    xn(i) += shift;
    const double fn = eval(xn);
    if (fn <= fx)
    {
      x = xn;
      fx = fn;
    }
  }
  return ReduceToDualCell(x);
}

namespace
{

RMatrix HalfHessian(const BandEvaluator &eval, const RVector &eta, double h, double f0)
{
  const int d = eta.size();
  RMatrix b(d, d);
  for (int i = 0; i < d; i++)
  {
    RVector p = eta, m = eta;
    p(i) += h;
    m(i) -= h;
    b(i, i) = 0.5 * (eval(p) - 2.0 * f0 + eval(m)) / (h * h);
  }
  for (int i = 0; i < d; i++)
  {
    for (int j = i + 1; j < d; j++)
    {
      RVector pp = eta, pm = eta, mp = eta, mm = eta;
      pp(i) += h;
      pp(j) += h;
      pm(i) += h;
      pm(j) -= h;
      mp(i) -= h;
      mp(j) += h;
      mm(i) -= h;
      mm(j) -= h;
      b(i, j) = 0.5 * (eval(pp) - eval(pm) - eval(mp) + eval(mm)) / (4.0 * h * h);
      b(j, i) = b(i, j);
    }
  }
  return b;
}

}  // namespace

HessianEstimate HessianFd(const BandEvaluator &eval, const RVector &eta, double h)
{
  Require(h > 0.0, ErrorCode::InvalidArgument, "finite-difference step must be positive");
  const double f0 = eval(eta);
  HessianEstimate est;
  est.step = h;
  est.b = HalfHessian(eval, eta, h, f0);
  est.b_half = HalfHessian(eval, eta, 0.5 * h, f0);
  const double diff = (est.b - est.b_half).cwiseAbs().maxCoeff();
  const double floor = 64.0 * DBL_EPSILON * std::max(1.0, std::abs(f0)) / (h * h);
  est.error_estimate = 4.0 / 3.0 * diff + floor;
  const double scale = est.b.cwiseAbs().maxCoeff();
  Require(est.error_estimate <= 0.1 * scale, ErrorCode::StepUnstable,
          "Richardson estimate " + std::to_string(est.error_estimate) + " exceeds 10% of |B| = " +
              std::to_string(scale));
  return est;
}

NondegeneracyResult NondegeneracyCheck(const RMatrix &b, double margin)
{
  Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (b + b.transpose()), Eigen::EigenvaluesOnly);
  NondegeneracyResult r;
  r.min_eigenvalue = es.eigenvalues()(0);
  r.nondegenerate = r.min_eigenvalue > margin;
  return r;
}

double QuadraticResidual(const BandEvaluator &eval, const EdgeModel &model, double radius,
                         int n_probe)
{
  const int d = model.eta.size();
  double c3 = 0.0;
  for (int i = 1; i <= n_probe; i++)
  {
    const double rho = radius * (0.5 + 0.5 * RadicalInverse(i, 2));
    RVector dq(d);
    if (d == 1)
    {
      dq(0) = (i % 2 ? rho : -rho);
    }
    else
    {
      const double angle = kTwoPi * RadicalInverse(i, 3);
      dq(0) = rho * std::cos(angle);
      dq(1) = rho * std::sin(angle);
    }
    const double model_val = model.lambda0 + dq.dot(model.b * dq);
    const double r = std::abs(eval(model.eta + dq) - model_val) / std::pow(dq.norm(), 3);
    c3 = std::max(c3, r);
  }
  return c3;
}

EdgeModel BuildEdgeModel(const BandEvaluator &eval, const RVector &eta, int band,
                         const EdgeModelOptions &opts)
{
  EdgeModel m;
  m.eta = eta;
  m.band = band;
  m.lambda0 = eval(eta);
  const HessianEstimate est = HessianFd(eval, eta, opts.fd_step);
  m.b = est.b;
  m.hessian_error = est.error_estimate;
  const NondegeneracyResult nd = NondegeneracyCheck(m.b, opts.margin);
  m.min_eigenvalue = nd.min_eigenvalue;
  m.nondegenerate = nd.nondegenerate;
  m.probe_radius = opts.probe_radius;
  m.c3 = QuadraticResidual(eval, m, opts.probe_radius, opts.n_probe);
  return m;
}

RMatrix HomogenizedMatrixBottom(const CoefficientField &field, const PlanewaveBasis &basis,
                                double h, FactorizationRule rule)
{
  const BandEvaluator eval = MakeBandEvaluator(field, basis, 1, rule);
  return HessianFd(eval, RVector::Zero(field.Dimension()), h).b;
}

}  // namespace blochkit
