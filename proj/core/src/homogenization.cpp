// SPDX-License-Identifier: Apache-2.0

#include "blochkit/homogenization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>
#include <spdlog/spdlog.h>

#include "blochkit/errors.hpp"
#include "blochkit/parallel.hpp"

namespace blochkit
{

namespace
{

// Largest |eigenvalue| of the Hermitian part.
double HermitianNorm(const CMatrix &m)
{
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Spectral norm through the largest eigenvalue of X^H X.
double SpectralNorm(const CMatrix &m)
{
  return std::sqrt(std::max(0.0, HermitianNorm(m.adjoint() * m)));
}

// V diag(1/(lambda - z)) V^H.
CMatrix ResolventFromPairs(const EigenPairs &ep, double z)
{
  const RVector inv = (ep.values.array() - z).inverse();
  return ep.vectors * inv.asDiagonal() * ep.vectors.adjoint();
}

double DistanceToSpectrum(const RVector &values, double z)
{
  return (values.array() - z).abs().minCoeff();
}

void RequireAway(const RVector &values, double z, const RVector &eta)
{
  const double dist = DistanceToSpectrum(values, z);
  if (dist <= 1e-8)
  {
    std::string where;
    for (int i = 0; i < eta.size(); i++)
    {
      where += (i ? "," : "") + std::to_string(eta(i));
    }
    throw Error(ErrorCode::NearSingular, "z = " + std::to_string(z) + " within " +
                                             std::to_string(dist) + " of the fiber spectrum at eta = (" +
                                             where + ")");
  }
}

// Toeplitz matrix of planewave coefficients: entry (k, k') = u(k - k').
CMatrix CoefficientToeplitz(const CVector &u, const PlanewaveBasis &basis)
{
  const int n = basis.Size();
  CMatrix m = CMatrix::Zero(n, n);
  for (int i = 0; i < n; i++)
  {
    for (int j = 0; j < n; j++)
    {
      const int p = basis.Position(basis.Index(i) - basis.Index(j));
      if (p >= 0)
      {
        m(i, j) = u(p);
      }
    }
  }
  return m;
}

struct PreparedBranch
{
  CMatrix toeplitz;
  RMatrix b;
  RVector eta;
};

std::vector<PreparedBranch> Prepare(const EffectiveResolventSpec &spec, const PlanewaveBasis &basis)
{
  std::vector<PreparedBranch> out;
  for (const auto &br : spec.branches)
  {
    Require(br.phi.size() == basis.Size(), ErrorCode::BadShape,
            "edge eigenvector does not match the basis");
    out.push_back({CoefficientToeplitz(br.phi, basis), br.b, br.eta});
  }
  return out;
}

CMatrix EffectiveFromPrepared(const std::vector<PreparedBranch> &prepared,
                              const PlanewaveBasis &basis, const RVector &eta, double eps,
                              double kappa)
{
  const int n = basis.Size();
  const int d = basis.Dimension();
  const double shift = eps * eps * kappa * kappa;
  CMatrix out = CMatrix::Zero(n, n);
  for (const auto &br : prepared)
  {
    RVector root(n);
    for (int i = 0; i < n; i++)
    {
      RVector q(d);
      for (int l = 0; l < d; l++)
      {
        q(l) = basis.Index(i)[l] + eta(l) - br.eta(l);
      }
      root(i) = 1.0 / std::sqrt(q.dot(br.b * q) + shift);
    }
    const CMatrix half = br.toeplitz * root.asDiagonal();
    out.noalias() += half * half.adjoint();
  }
  return out;
}

}  // namespace

void ValidateHomogParams(const HomogParams &params)
{
  Require(!params.epsilons.empty(), ErrorCode::InvalidArgument, "empty epsilon list");
  Require(params.kappa > 0.0, ErrorCode::InvalidArgument, "kappa must be positive");
  Require(params.gap_lower < params.gap_upper, ErrorCode::InvalidArgument, "empty gap interval");
  for (std::size_t i = 0; i < params.epsilons.size(); i++)
  {
    const double e = params.epsilons[i];
    Require(e > 0.0, ErrorCode::InvalidArgument, "epsilon values must be positive");
    Require(i == 0 || e < params.epsilons[i - 1], ErrorCode::InvalidArgument,
            "epsilon values must be strictly descending");
    const double z = params.lambda0 - e * e * params.kappa * params.kappa;
    Require(z > params.gap_lower && z < params.gap_upper, ErrorCode::InvalidArgument,
            "lambda0 - eps^2 kappa^2 = " + std::to_string(z) + " leaves the gap (" +
                std::to_string(params.gap_lower) + ", " + std::to_string(params.gap_upper) +
                ") at eps = " + std::to_string(e));
  }
}

EffectiveResolventSpec BuildEdgeSpec(const CoefficientField &field, const PlanewaveBasis &basis,
                                     const SpectralEdgeReport &report, const EdgeModelOptions &opts,
                                     std::vector<EdgeModel> *models)
{
  Require(report.simple, ErrorCode::InvalidArgument, "effective resolvent needs a simple edge");
  const double sgn = report.side == EdgeSide::Upper ? 1.0 : -1.0;
  const BandEvaluator raw = MakeBandEvaluator(field, basis, report.band);
  const BandEvaluator eval = [raw, sgn](const RVector &eta) { return sgn * raw(eta); };
  EffectiveResolventSpec spec;
  for (const auto &p : report.points)
  {
    EdgeModel m = BuildEdgeModel(eval, p.eta, report.band, opts);
    Require(m.nondegenerate, ErrorCode::InvalidArgument, "edge Hessian is not positive definite");
    EffectiveBranch br;
    br.eta = ReduceToDualCell(p.eta);
    br.b = m.b;
    const EigenPairs ep = EigenFiber(AssembleFiber(field, basis, br.eta), report.band);
    br.phi = ep.vectors.col(report.band - 1);
    spec.branches.push_back(br);
    if (models)
    {
      m.lambda0 *= sgn;
      m.b *= sgn;
      models->push_back(m);
    }
  }
  return spec;
}

EffectiveResolventSpec ScaleHessians(const EffectiveResolventSpec &spec, double factor)
{
  EffectiveResolventSpec out = spec;
  for (auto &br : out.branches)
  {
    br.b *= factor;
  }
  return out;
}

CMatrix ResolventFromMatrix(const CMatrix &h, double z)
{
  Require(h.rows() == h.cols(), ErrorCode::BadShape, "resolvent of a non-square matrix");
  const EigenPairs ep = EigenFiber(h, static_cast<int>(h.rows()));
  RequireAway(ep.values, z, RVector());
  const CMatrix x = ResolventFromPairs(ep, z);
  CMatrix r = h * x - z * x;
  r -= CMatrix::Identity(h.rows(), h.cols());
  // |R|_2 <= sqrt(|R|_1 |R|_inf).
  const double n1 = r.cwiseAbs().colwise().sum().maxCoeff();
  const double ninf = r.cwiseAbs().rowwise().sum().maxCoeff();
  Require(std::sqrt(n1 * ninf) <= 1e-8, ErrorCode::SolverFailure,
          "resolvent residual " + std::to_string(std::sqrt(n1 * ninf)));
  return x;
}

CMatrix ExactResolventFiber(const CoefficientField &field, const PlanewaveBasis &basis,
                            const RVector &eta, double lambda0, double eps, double kappa,
                            FactorizationRule rule)
{
  const double z = lambda0 - eps * eps * kappa * kappa;
  const FiberMatrix fm = AssembleFiber(field, basis, eta, rule);
  try
  {
    return ResolventFromMatrix(fm.h, z);
  }
  catch (const Error &e)
  {
    if (e.code() == ErrorCode::NearSingular)
    {
      RequireAway(FiberEigenvalues(fm.h, basis.Size()), z, fm.eta);
    }
    throw;
  }
}

CMatrix EffectiveResolventFiber(const EffectiveResolventSpec &spec, const PlanewaveBasis &basis,
                                const RVector &eta, double eps, double kappa)
{
  return EffectiveFromPrepared(Prepare(spec, basis), basis, eta, eps, kappa);
}

LogLogFit FitLogLog(const std::vector<double> &x, const std::vector<double> &y)
{
  Require(x.size() == y.size() && x.size() >= 2, ErrorCode::InvalidArgument,
          "log-log fit needs at least two points");
  const int n = static_cast<int>(x.size());
  RVector lx(n), ly(n);
  for (int i = 0; i < n; i++)
  {
    Require(x[i] > 0.0 && y[i] > 0.0, ErrorCode::InvalidArgument, "log-log fit of nonpositive data");
    lx(i) = std::log(x[i]);
    ly(i) = std::log(y[i]);
  }
  const double mx = lx.mean();
  const double my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
  LogLogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const RVector res = ly.array() - (f.intercept + f.slope * lx.array());
  f.residual = std::sqrt(res.squaredNorm() / n);
  if (n > 2)
  {
    const double se = std::sqrt(res.squaredNorm() / (n - 2) / sxx);
    const boost::math::students_t dist(n - 2);
    const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
    f.ci_low = f.slope - q * se;
    f.ci_high = f.slope + q * se;
  }
  else
  {
    f.ci_low = f.ci_high = f.slope;
  }
  return f;
}

std::vector<RVector> SweepPoints(const BrillouinGrid &grid,
                                 const std::vector<EffectiveBranch> &branches, double eps,
                                 double kappa, bool probes)
{
  std::vector<RVector> pts;
  for (int i = 0; i < grid.Size(); i++)
  {
    pts.push_back(grid.Node(i));
  }
  if (!probes)
  {
    return pts;
  }
  const int d = grid.Dimension();
  std::vector<RVector> dirs;
  for (int l = 0; l < d; l++)
  {
    dirs.push_back(RVector::Unit(d, l));
  }
  if (d == 2)
  {
    dirs.push_back(RVector::Ones(2) / std::sqrt(2.0));
    dirs.push_back(RVector(RVector::Unit(2, 0) - RVector::Unit(2, 1)) / std::sqrt(2.0));
  }
  for (const auto &br : branches)
  {
    pts.push_back(ReduceToDualCell(br.eta));
    for (const double s : {0.25, 0.5, 1.0, 2.0, 4.0})
    {
      for (const auto &v : dirs)
      {
        const double q = v.dot(br.b * v);
        if (q <= 0.0)
        {
          continue;
        }
        const RVector step = eps * kappa * s / std::sqrt(q) * v;
        pts.push_back(ReduceToDualCell(br.eta + step));
        pts.push_back(ReduceToDualCell(br.eta - step));
      }
    }
  }
  return pts;
}

namespace
{

// sup over the points of |S(eps) - S0(eps)| for all eps at once; grid nodes
// are shared between eps values, probes are per eps.
std::vector<std::pair<double, RVector>> SweepNorms(const CoefficientField &field,
                                                   const EffectiveResolventSpec &spec,
                                                   const PlanewaveBasis &basis,
                                                   const BrillouinGrid &grid,
                                                   const HomogParams &params, bool probes,
                                                   FactorizationRule rule, int threads)
{
  const auto prepared = Prepare(spec, basis);
  const int n_eps = static_cast<int>(params.epsilons.size());
  const double kk = params.kappa * params.kappa;

  struct Job
  {
    RVector eta;
    int eps_index;  // -1: every eps
  };
  std::vector<Job> jobs;
  for (int i = 0; i < grid.Size(); i++)
  {
    jobs.push_back({grid.Node(i), -1});
  }
  if (probes)
  {
    const BrillouinGrid empty_grid(grid.Dimension(), 3);
    for (int e = 0; e < n_eps; e++)
    {
      const auto pts = SweepPoints(empty_grid, spec.branches, params.epsilons[e], params.kappa, true);
      for (std::size_t p = empty_grid.Size(); p < pts.size(); p++)
      {
        jobs.push_back({pts[p], e});
      }
    }
  }

  RMatrix norms = RMatrix::Constant(jobs.size(), n_eps, -1.0);
  ParallelFor(static_cast<int>(jobs.size()), threads,
              [&](int j)
              {
                const Job &job = jobs[j];
                const FiberMatrix fm = AssembleFiber(field, basis, job.eta, rule);
                const EigenPairs ep = EigenFiber(fm, basis.Size());
                for (int e = 0; e < n_eps; e++)
                {
                  if (job.eps_index >= 0 && job.eps_index != e)
                  {
                    continue;
                  }
                  const double eps = params.epsilons[e];
                  const double z = params.lambda0 - eps * eps * kk;
                  RequireAway(ep.values, z, fm.eta);
                  const CMatrix s = ResolventFromPairs(ep, z);
                  const CMatrix s0 = EffectiveFromPrepared(prepared, basis, fm.eta, eps, params.kappa);
                  norms(j, e) = HermitianNorm(s - s0);
                }
              });

  std::vector<std::pair<double, RVector>> out;
  for (int e = 0; e < n_eps; e++)
  {
    int arg = 0;
    for (int j = 1; j < static_cast<int>(jobs.size()); j++)
    {
      if (norms(j, e) > norms(arg, e))
      {
        arg = j;
      }
    }
    out.emplace_back(norms(arg, e), jobs[arg].eta);
  }
  return out;
}

}  // namespace

ComparisonReport NormDifferenceSweep(const CoefficientField &field,
                                     const EffectiveResolventSpec &spec,
                                     const PlanewaveBasis &basis, const BrillouinGrid &grid,
                                     const HomogParams &params, const SweepOptions &opts)
{
  ValidateHomogParams(params);
  Require(!spec.branches.empty(), ErrorCode::InvalidArgument, "effective spec has no branches");
  ComparisonReport rep;
  rep.kappa = params.kappa;
  rep.cutoff = basis.Cutoff();
  rep.grid_points = grid.PointsPerAxis();

  const auto main = SweepNorms(field, spec, basis, grid, params, opts.probes, opts.rule, opts.threads);
  std::vector<std::pair<double, RVector>> coarse;
  if (opts.coarse_grid)
  {
    coarse = SweepNorms(field, spec, basis, grid.Coarsened(), params, opts.probes, opts.rule,
                        opts.threads);
  }
  std::vector<std::pair<double, RVector>> coarse_k;
  if (opts.coarse_spec)
  {
    const PlanewaveBasis half(basis.Dimension(), std::max(1, basis.Cutoff() / 2));
    coarse_k = SweepNorms(field, opts.coarse_spec(half), half, grid, params, opts.probes, opts.rule,
                          opts.threads);
  }

  std::vector<double> xs, ys;
  for (std::size_t e = 0; e < params.epsilons.size(); e++)
  {
    SweepRow row;
    row.epsilon = params.epsilons[e];
    row.scaled_norm = main[e].first;
    row.r_norm = row.epsilon * row.epsilon * row.scaled_norm;
    row.argmax = main[e].second;
    row.coarse_grid_norm = opts.coarse_grid ? coarse[e].first : -1.0;
    row.coarse_basis_norm = opts.coarse_spec ? coarse_k[e].first : -1.0;
    rep.rows.push_back(row);
    xs.push_back(row.epsilon);
    ys.push_back(row.r_norm);
    spdlog::debug("eps {:.4g}: scaled {:.6e}, r {:.6e}", row.epsilon, row.scaled_norm, row.r_norm);
  }
  if (xs.size() >= 2)
  {
    rep.fit = FitLogLog(xs, ys);
  }
  return rep;
}

KlmnReport KlmnBoundCheck(const CMatrix &h, const CMatrix &k, double a, double b, double zeta)
{
  Require(h.rows() == k.rows() && h.cols() == k.cols(), ErrorCode::BadShape, "shape mismatch");
  Require(b >= 0.0 && b < 1.0, ErrorCode::InvalidArgument, "form bound b must lie in [0, 1)");
  const EigenPairs eh = EigenFiber(h, static_cast<int>(h.rows()));
  RequireAway(eh.values, zeta, RVector());
  KlmnReport rep;
  // (a + bH)(H - zeta)^{-1} is diagonal in the eigenbasis of H.
  rep.q = ((a + b * eh.values.array()).abs() / (eh.values.array() - zeta).abs()).maxCoeff();
  rep.hypothesis2 = rep.q < 1.0;
  if (!rep.hypothesis2)
  {
    return rep;
  }
  const CMatrix rh = ResolventFromPairs(eh, zeta);
  const CMatrix rk = ResolventFromMatrix(k, zeta);
  rep.lhs = HermitianNorm(rk - rh);
  const double rh_norm = 1.0 / DistanceToSpectrum(eh.values, zeta);
  rep.rhs = 4.0 * rep.q / ((1.0 - rep.q) * (1.0 - rep.q)) * rh_norm;
  rep.holds = rep.lhs <= rep.rhs * (1.0 + 1e-8);
  return rep;
}

PerturbedEdge TrackPerturbedEdge(const CoefficientField &perturbed, const PlanewaveBasis &basis,
                                 const RVector &eta0, const CMatrix &reference, int first_band,
                                 double half_width, double fd_step)
{
  const int nb = static_cast<int>(reference.cols());
  PerturbedEdge edge;
  edge.lambda0 = std::numeric_limits<double>::infinity();
  for (int j = 0; j < nb; j++)
  {
    const BandEvaluator eval =
        MakeBranchEvaluator(perturbed, basis, reference.col(j), first_band, nb);
    RVector eta = eta0;
    try
    {
      const RVector red = RefineMinimizer(eval, eta0, half_width);
      // Keep the minimizer next to eta0 so the branch labels stay valid.
      RVector off = red - eta0;
      for (int i = 0; i < off.size(); i++)
      {
        off(i) -= std::floor(off(i) + 0.5);
      }
      eta = eta0 + off;
    }
    catch (const Error &e)
    {
      if (e.code() != ErrorCode::NotLocalMin)
      {
        throw;
      }
      spdlog::warn("branch {} minimizer left the search box; using the reference point", j);
    }
    EffectiveBranch br;
    br.eta = eta;
    br.b = HessianFd(eval, eta, fd_step).b;
    // Eigenvector of the branch at the minimizer, chosen by overlap.
    const EigenPairs ep = EigenFiber(AssembleFiberAt(perturbed, basis, eta), first_band + nb);
    int best = 0;
    double best_ov = -1.0;
    for (int i = std::max(0, first_band - 2); i < first_band - 1 + nb; i++)
    {
      const double ov = std::abs(reference.col(j).dot(ep.vectors.col(i)));
      if (ov > best_ov)
      {
        best_ov = ov;
        best = i;
      }
    }
    br.phi = ep.vectors.col(best);
    const double value = ep.values(best);
    edge.values.push_back(value);
    edge.lambda0 = std::min(edge.lambda0, value);
    edge.branches.push_back(br);
  }
  return edge;
}

namespace
{

struct PerturbedNorms
{
  double s_diff = 0.0;
  double s_tilde_diff = 0.0;
  double combined = 0.0;
};

PerturbedNorms PerturbedSweepAt(const CoefficientField &a, const CoefficientField &at,
                                const PerturbedEdge &edge, const PlanewaveBasis &basis,
                                const BrillouinGrid &grid, double lambda0, double eps,
                                double kappa, bool probes, int threads)
{
  EffectiveResolventSpec spec;
  spec.branches = edge.branches;
  const auto prepared = Prepare(spec, basis);
  const auto pts = SweepPoints(grid, edge.branches, eps, kappa, probes);
  const double shift = eps * eps * kappa * kappa;
  const double z = lambda0 - shift;
  const double zt = edge.lambda0 - shift;
  std::vector<PerturbedNorms> vals(pts.size());
  ParallelFor(static_cast<int>(pts.size()), threads,
              [&](int i)
              {
                const FiberMatrix fa = AssembleFiber(a, basis, pts[i]);
                const FiberMatrix ft = AssembleFiber(at, basis, pts[i]);
                const EigenPairs ea = EigenFiber(fa, basis.Size());
                const EigenPairs et = EigenFiber(ft, basis.Size());
                RequireAway(ea.values, z, fa.eta);
                RequireAway(et.values, zt, ft.eta);
                const CMatrix s = ResolventFromPairs(ea, z);
                const CMatrix st = ResolventFromPairs(et, zt);
                const CMatrix s0 = EffectiveFromPrepared(prepared, basis, fa.eta, eps, kappa);
                vals[i] = {HermitianNorm(s - st), HermitianNorm(st - s0), HermitianNorm(s - s0)};
              });
  PerturbedNorms out;
  for (const auto &v : vals)
  {
    out.s_diff = std::max(out.s_diff, v.s_diff);
    out.s_tilde_diff = std::max(out.s_tilde_diff, v.s_tilde_diff);
    out.combined = std::max(out.combined, v.combined);
  }
  return out;
}

}  // namespace

PerturbedReport PerturbedComparison(const PerturbedSetup &setup, const PlanewaveBasis &basis,
                                    const BrillouinGrid &grid, const HomogParams &params,
                                    const PerturbedOptions &opts)
{
  ValidateHomogParams(params);
  const CoefficientField &a = setup.a;
  const PerturbationField &b = setup.b;
  Require(setup.cluster.h >= 1, ErrorCode::InvalidArgument, "empty edge cluster");
  const double kappa = params.kappa;
  const double kk = kappa * kappa;

  PerturbedReport rep;
  rep.kappa = kappa;
  rep.c2 = b.OperatorNormBound() / a.CoercivityAlpha();

  // Analytic branch labels at eta0: the cluster rotated to diagonalize G.
  const RVector eta0 = setup.eta0;
  const CMatrix hb = AssembleFiber(b, basis, eta0).h;
  const CMatrix g = setup.cluster.vectors.adjoint() * hb * setup.cluster.vectors;
  Eigen::SelfAdjointEigenSolver<CMatrix> gs(0.5 * (g + g.adjoint()));
  const CMatrix reference = setup.cluster.vectors * gs.eigenvectors();
  const int first = setup.cluster.first_band;

  const double sigma0 = a.AdmissibleStep(b);
  rep.probe_t = opts.probe_t > 0.0 ? opts.probe_t : sigma0 / 1000.0;
  if (b.IsZero())
  {
    // No coupling: t = 0 for every eps and the form bound constants vanish.
    rep.c1 = 0.0;
    rep.c3 = 0.0;
  }
  else
  {
    const PerturbedEdge probe = TrackPerturbedEdge(AddScaled(a, b, rep.probe_t), basis, eta0,
                                                   reference, first, opts.half_width);
    rep.c1 = std::abs(probe.lambda0 - setup.lambda0) / rep.probe_t + rep.c2 * setup.lambda0;
    Require(rep.c1 > 0.0, ErrorCode::InvalidArgument, "c1 vanishes; lambda0 must be positive");
    rep.c3 = rep.c2 / rep.c1;
  }
  const double ck = rep.c3 * kk;
  const double uniform = ck < 1.0 ? 16.0 * (1.0 + ck) / (kk * (1.0 - ck) * (1.0 - ck))
                                  : std::numeric_limits<double>::infinity();
  rep.uniform_ok = ck < 1.0;

  auto run = [&](double scale, std::vector<PerturbedRow> &rows)
  {
    std::vector<double> xs, ys;
    for (double eps : params.epsilons)
    {
      PerturbedRow row;
      row.epsilon = eps;
      row.t = b.IsZero() ? 0.0 : scale * std::pow(eps, 4) * kk / rep.c1;
      const CoefficientField at = AddScaled(a, b, row.t);
      const PerturbedEdge edge =
          TrackPerturbedEdge(at, basis, eta0, reference, first, opts.half_width);
      row.lambda0_tilde = b.IsZero() ? setup.lambda0 : edge.lambda0;
      PerturbedEdge used = edge;
      used.lambda0 = row.lambda0_tilde;
      const PerturbedNorms n = PerturbedSweepAt(a, at, used, basis, grid, setup.lambda0, eps,
                                                kappa, opts.probes, opts.threads);
      const double e2 = eps * eps;
      row.s_diff = n.s_diff;
      row.s_tilde_diff = n.s_tilde_diff;
      row.combined = n.combined;
      row.combined_r = e2 * n.combined;
      const double den = 1.0 - e2 - 2.0 * rep.c3 * e2 * e2 * kk;
      row.per_eps_bound = den > 0.0 ? 4.0 * (1.0 + 2.0 * rep.c3 * e2 * kk) / (kk * den * den)
                                    : std::numeric_limits<double>::infinity();
      row.uniform_bound = uniform;
      row.bound_holds = row.s_diff <= std::min(row.per_eps_bound, row.uniform_bound);
      rows.push_back(row);
      xs.push_back(eps);
      ys.push_back(row.combined_r);
      spdlog::debug("eps {:.4g} t {:.3e}: |S-S~| {:.4e} |S~-S~0| {:.4e} |S-S~0| {:.4e}", eps,
                    row.t, row.s_diff, row.s_tilde_diff, row.combined);
    }
    return xs.size() >= 2 ? FitLogLog(xs, ys) : LogLogFit{};
  };

  rep.fit = run(1.0, rep.rows);
  rep.uniform_ok = rep.uniform_ok && std::all_of(rep.rows.begin(), rep.rows.end(),
                                                 [](const PerturbedRow &r) { return r.bound_holds; });
  if (opts.sensitivity && !b.IsZero())
  {
    std::vector<PerturbedRow> tmp;
    rep.slope_half_t = run(0.5, tmp).slope;
    tmp.clear();
    rep.slope_one_and_half_t = run(1.5, tmp).slope;
  }
  else
  {
    rep.slope_half_t = rep.slope_one_and_half_t = rep.fit.slope;
  }
  return rep;
}

std::vector<ProjectionSplitRow> ProjectionSplitNorms(
    const CoefficientField &field, const EffectiveResolventSpec &spec, const PlanewaveBasis &basis,
    const BrillouinGrid &grid, const std::vector<int> &neighborhood, int band, int count,
    const HomogParams &params, int threads)
{
  ValidateHomogParams(params);
  Require(band >= 1 && count >= 1 && band + count - 1 <= basis.Size(), ErrorCode::InvalidArgument,
          "projection bands out of range");
  std::vector<char> in_o(grid.Size(), 0);
  for (int i : neighborhood)
  {
    Require(i >= 0 && i < grid.Size(), ErrorCode::InvalidArgument, "neighbourhood node out of range");
    in_o[i] = 1;
  }
  const auto prepared = Prepare(spec, basis);
  const int n_eps = static_cast<int>(params.epsilons.size());
  const int n = basis.Size();
  std::vector<std::array<double, 3>> vals(static_cast<std::size_t>(grid.Size()) * n_eps);
  ParallelFor(grid.Size(), threads,
              [&](int i)
              {
                const FiberMatrix fm = AssembleFiber(field, basis, grid.Node(i));
                const EigenPairs ep = EigenFiber(fm, n);
                CMatrix f = CMatrix::Zero(n, n);
                if (in_o[i])
                {
                  const CMatrix v = ep.vectors.middleCols(band - 1, count);
                  f = v * v.adjoint();
                }
                const CMatrix fperp = CMatrix::Identity(n, n) - f;
                for (int e = 0; e < n_eps; e++)
                {
                  const double eps = params.epsilons[e];
                  const double z = params.lambda0 - eps * eps * params.kappa * params.kappa;
                  RequireAway(ep.values, z, fm.eta);
                  const CMatrix s = ResolventFromPairs(ep, z);
                  const CMatrix s0 = EffectiveFromPrepared(prepared, basis, fm.eta, eps, params.kappa);
                  vals[static_cast<std::size_t>(i) * n_eps + e] = {
                      SpectralNorm(s * fperp), SpectralNorm(s0 * fperp),
                      eps * SpectralNorm((s - s0) * f)};
                }
              });
  std::vector<ProjectionSplitRow> rows;
  for (int e = 0; e < n_eps; e++)
  {
    ProjectionSplitRow row;
    row.epsilon = params.epsilons[e];
    for (int i = 0; i < grid.Size(); i++)
    {
      const auto &v = vals[static_cast<std::size_t>(i) * n_eps + e];
      row.s_fperp = std::max(row.s_fperp, v[0]);
      row.s0_fperp = std::max(row.s0_fperp, v[1]);
      row.scaled_f_diff = std::max(row.scaled_f_diff, v[2]);
    }
    rows.push_back(row);
  }
  return rows;
}

namespace
{

// DFT matrix F(q, s) = exp(sign * 2 pi i (q - offset) s / S).
CMatrix DftMatrix(int s_count, int offset, double sign)
{
  CMatrix f(s_count, s_count);
  for (int q = 0; q < s_count; q++)
  {
    for (int s = 0; s < s_count; s++)
    {
      const double ang = sign * kTwoPi * static_cast<double>(q - offset) * s / s_count;
      f(q, s) = std::polar(1.0, ang);
    }
  }
  return f;
}

}  // namespace

RoundtripReport BlochTransformRoundtrip(const std::vector<cplx> &samples, int cells,
                                        const CoefficientField &field, const PlanewaveBasis &basis)
{
  const int d = basis.Dimension();
  const int kc = basis.Cutoff();
  Require(cells >= 2 && cells % 2 == 0, ErrorCode::InvalidArgument,
          "the number of cells per axis must be even");
  const int s_count = (2 * kc + 1) * cells;
  const int total = d == 1 ? s_count : s_count * s_count;
  Require(static_cast<int>(samples.size()) == total, ErrorCode::BadShape,
          "expected " + std::to_string(total) + " samples");
  const int offset = cells * kc + cells / 2;
  const CMatrix fwd = DftMatrix(s_count, offset, -1.0);
  const CMatrix inv = DftMatrix(s_count, offset, 1.0).transpose();  // (s, q)

  // Continuous Fourier transform at q / L by the trapezoid rule.
  const double cell_len = kTwoPi * cells / s_count;
  const double vol = std::pow(cell_len, d);
  CMatrix gq;
  if (d == 1)
  {
    const Eigen::Map<const CVector> g(samples.data(), s_count);
    gq = fwd * g;
  }
  else
  {
    const Eigen::Map<const CMatrix> g(samples.data(), s_count, s_count);
    gq = fwd * g * fwd.transpose();
  }
  gq *= vol;

  const BrillouinGrid grid(d, cells);
  const int n = basis.Size();
  const double norm_basis = std::pow(kTwoPi, -0.5 * d);
  RoundtripReport rep;
  rep.energy = RMatrix::Zero(grid.Size(), n);
  CMatrix back = CMatrix::Zero(gq.rows(), gq.cols());
  auto q_index = [&](int k, int j) { return cells * (k + kc) + j; };
  for (int node = 0; node < grid.Size(); node++)
  {
    const auto c = grid.Coords(node);
    const EigenPairs ep = EigenFiber(AssembleFiber(field, basis, grid.Node(node)), n);
    CVector ghat(n);
    for (int i = 0; i < n; i++)
    {
      const LatticeIndex k = basis.Index(i);
      ghat(i) = d == 1 ? gq(q_index(k[0], c[0]), 0)
                       : gq(q_index(k[0], c[0]), q_index(k[1], c[1]));
    }
    const CVector coeff = norm_basis * (ep.vectors.adjoint() * ghat);
    rep.energy.row(node) = coeff.cwiseAbs2().transpose() / std::pow(cells, d);
    const CVector rebuilt = (ep.vectors * coeff) / norm_basis;
    for (int i = 0; i < n; i++)
    {
      const LatticeIndex k = basis.Index(i);
      if (d == 1)
      {
        back(q_index(k[0], c[0]), 0) = rebuilt(i);
      }
      else
      {
        back(q_index(k[0], c[0]), q_index(k[1], c[1])) = rebuilt(i);
      }
    }
  }
  back /= vol;
  CMatrix g_back;
  if (d == 1)
  {
    g_back = inv * back / static_cast<double>(s_count);
  }
  else
  {
    g_back = inv * back * inv.transpose() / (static_cast<double>(s_count) * s_count);
  }
  double err = 0.0, ref = 0.0;
  for (int i = 0; i < total; i++)
  {
    const cplx orig = samples[i];
    const cplx rec = g_back.data()[i];
    err += std::norm(rec - orig);
    ref += std::norm(orig);
  }
  rep.norm_squared = vol * ref;
  rep.roundtrip_error = ref > 0.0 ? std::sqrt(err / ref) : std::sqrt(err);
  const double energy = rep.energy.sum();
  rep.parseval_defect =
      rep.norm_squared > 0.0 ? std::abs(energy - rep.norm_squared) / rep.norm_squared : energy;
  return rep;
}

}  // namespace blochkit
