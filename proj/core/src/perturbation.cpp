// SPDX-License-Identifier: Apache-2.0

#include "blochkit/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <random>

#include <spdlog/spdlog.h>

#include "blochkit/errors.hpp"
#include "blochkit/field_io.hpp"
#include "blochkit/parallel.hpp"
#include "json.hpp"

namespace blochkit
{

namespace
{

using ojson = nlohmann::ordered_json;

// Coefficients of conj(f): conj(c(-k)).
FourierSeries Conjugate(const FourierSeries &f)
{
  FourierSeries out(f.Dimension(), f.Cutoff());
  const auto &lat = f.Lattice();
  for (int p = 0; p < lat.Size(); p++)
  {
    out.Data()[p] = std::conj(f[Negate(lat.Index(p))]);
  }
  return out;
}

// (d_l + i eta_l) u as functions, one per direction.
std::vector<FourierSeries> GradientSeries(const CVector &u, const PlanewaveBasis &basis,
                                          const RVector &eta)
{
  std::vector<FourierSeries> out;
  for (int l = 0; l < basis.Dimension(); l++)
  {
    out.push_back(ToSeries(GradientVector(u, basis, eta, l), basis));
  }
  return out;
}

struct Candidate
{
  FourierSeries beta;
  int slot = -1;  // diagonal slot, -1 for a scalar field
  std::string name;
};

double ClusterMean(const Cluster &c) { return c.values.size() ? c.values.mean() : 0.0; }

double ToleranceFor(double lambda0, double cluster_tol)
{
  return cluster_tol > 0.0 ? cluster_tol : DefaultClusterTol(lambda0);
}

// Cluster diameter of h_a + t h_b over the 0-based index range.
double ClusterDiameter(const CMatrix &h_a, const CMatrix &h_b, double t, int first, int h)
{
  const RVector v = FiberEigenvalues(h_a + t * h_b, first + h);
  return v(first + h - 1) - v(first);
}

double LinearRange(const CMatrix &h_a, const CMatrix &h_b, int first, int h, double spread,
                   double t0, double sigma0)
{
  double t_lin = 0.0;
  for (int j = 0; j <= 20; j++)
  {
    const double t = t0 * std::ldexp(1.0, j);
    if (t >= sigma0)
    {
      break;
    }
    if (ClusterDiameter(h_a, h_b, t, first, h) < 0.5 * spread * t)
    {
      break;
    }
    t_lin = t;
  }
  return t_lin;
}

// Splits the 0-based index range [first, first + h) of ascending values at
// gaps larger than tol.
std::vector<std::pair<int, int>> Partition(const RVector &values, int first, int h, double tol)
{
  std::vector<std::pair<int, int>> out;
  int start = first;
  for (int i = first + 1; i <= first + h; i++)
  {
    if (i == first + h || values(i) - values(i - 1) > tol)
    {
      out.emplace_back(start, i - start);
      start = i;
    }
  }
  return out;
}

ojson EtaJson(const RVector &eta)
{
  ojson a = ojson::array();
  for (int i = 0; i < eta.size(); i++)
  {
    a.push_back(eta(i));
  }
  return a;
}

ojson FiniteOrNull(double x)
{
  return std::isfinite(x) ? ojson(x) : ojson(nullptr);
}

}  // namespace

SplittingMatrix BuildSplittingMatrix(const PerturbationField &b, const PlanewaveBasis &basis,
                                     const RVector &eta, const CMatrix &cluster_vectors)
{
  Require(cluster_vectors.rows() == basis.Size(), ErrorCode::BadShape,
          "cluster vectors do not match the basis");
  const CMatrix hb = AssembleFiber(b, basis, eta).h;
  SplittingMatrix s;
  s.eta = ReduceToDualCell(eta);
  s.h = static_cast<int>(cluster_vectors.cols());
  s.basis = cluster_vectors;
  const CMatrix g = cluster_vectors.adjoint() * hb * cluster_vectors;
  s.g = 0.5 * (g + g.adjoint());
  return s;
}

RVector FirstOrderSlopes(const SplittingMatrix &g)
{
  if (g.h == 0)
  {
    return RVector();
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(g.g, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double Spread(const RVector &slopes)
{
  return slopes.size() ? slopes.maxCoeff() - slopes.minCoeff() : 0.0;
}

std::string PlanDocument(const PerturbationPlan &plan)
{
  ojson doc;
  doc["construction"] = plan.construction;
  doc["sign"] = plan.sign;
  doc["sigma0"] = FiniteOrNull(plan.sigma0);
  doc["t0"] = plan.t0;
  doc["t_lin"] = plan.t_lin;
  doc["containment_radius"] = plan.containment_radius;
  doc["budget"] = plan.budget;
  doc["budget_used"] = plan.budget_used;
  ojson targets = ojson::array();
  for (const auto &t : plan.targets)
  {
    ojson rec;
    rec["eta"] = EtaJson(t.eta);
    rec["lambda0"] = t.lambda0;
    rec["first_band"] = t.first_band;
    rec["h"] = t.h;
    rec["slopes"] = EtaJson(t.slopes);
    rec["spread"] = t.spread;
    targets.push_back(rec);
  }
  doc["targets"] = targets;
  ojson steps = ojson::array();
  for (const auto &s : plan.steps)
  {
    ojson rec;
    rec["t"] = s.t;
    rec["max_h_before"] = s.max_h_before;
    rec["max_h_after"] = s.max_h_after;
    rec["attempts"] = s.attempts;
    steps.push_back(rec);
  }
  doc["steps"] = steps;
  doc["b"] = ojson::parse(FieldDocument(plan.b));
  return doc.dump(2);
}

PerturbationPlan ConstructSplittingB(const CoefficientField &a, const PlanewaveBasis &basis,
                                     const RVector &eta, const Cluster &cluster,
                                     const SplitOptions &opts)
{
  Require(cluster.h >= 2, ErrorCode::InvalidArgument, "splitting needs a cluster with h >= 2");
  Require(opts.b_cutoff >= 1, ErrorCode::InvalidArgument, "B cutoff must be at least 1");
  const int d = basis.Dimension();
  const RVector e = ReduceToDualCell(eta);
  const double lambda0 = ClusterMean(cluster);
  const double ctol = ToleranceFor(lambda0, opts.cluster_tol);

  std::vector<std::vector<FourierSeries>> grads;
  for (int i = 0; i < cluster.h; i++)
  {
    grads.push_back(GradientSeries(cluster.vectors.col(i), basis, e));
  }

  // Candidates in order of preference: real then imaginary part of the
  // cross product for every pair and direction, then the squared-modulus
  // difference.
  std::vector<Candidate> cands;
  for (int i = 0; i < cluster.h; i++)
  {
    for (int j = i + 1; j < cluster.h; j++)
    {
      for (int l = 0; l < d; l++)
      {
        const FourierSeries g = Multiply(grads[i][l], Conjugate(grads[j][l]));
        cands.push_back({g.RealPart().Truncated(opts.b_cutoff), l, "cross_real"});
        cands.push_back({g.ImagPart().Truncated(opts.b_cutoff), l, "cross_imag"});
      }
    }
  }
  for (int i = 0; i < cluster.h; i++)
  {
    for (int j = i + 1; j < cluster.h; j++)
    {
      for (int l = 0; l < d; l++)
      {
        FourierSeries diff = Multiply(grads[i][l], Conjugate(grads[i][l]));
        FourierSeries sq = Multiply(grads[j][l], Conjugate(grads[j][l]));
        sq *= -1.0;
        diff += sq;
        cands.push_back({diff.RealPart().Truncated(opts.b_cutoff), l, "modulus_difference"});
      }
    }
  }

  const CMatrix h_a = AssembleFiber(a, basis, e).h;
  for (const auto &c : cands)
  {
    if (c.beta.AbsSum() <= opts.tol)
    {
      continue;
    }
    PerturbationField b = PerturbationField::DiagonalSlot(c.beta, d, c.slot);
    b = b.Scaled(1.0 / b.SupNorm());
    const SplittingMatrix g = BuildSplittingMatrix(b, basis, e, cluster.vectors);
    const RVector slopes = FirstOrderSlopes(g);
    const double spread = Spread(slopes);
    if (spread <= std::max(opts.tol, 1e-9 * slopes.cwiseAbs().maxCoeff()))
    {
      continue;
    }
    PerturbationPlan plan;
    plan.b = b;
    plan.sign = 1;
    plan.construction = c.name;
    plan.sigma0 = a.AdmissibleStep(b);
    plan.t0 = std::min(plan.sigma0 / 10.0, 10.0 * ctol / spread);
    const CMatrix h_b = AssembleFiber(b, basis, e).h;
    plan.t_lin = LinearRange(h_a, h_b, cluster.first_band - 1, cluster.h, spread, plan.t0,
                             plan.sigma0);
    PlanTarget target;
    target.eta = e;
    target.lambda0 = lambda0;
    target.first_band = cluster.first_band;
    target.h = cluster.h;
    target.slopes = slopes;
    target.spread = spread;
    plan.targets.push_back(target);
    spdlog::debug("splitting B via {} in slot {}, spread {:.3e}", c.name, c.slot, spread);
    return plan;
  }
  throw Error(ErrorCode::DegenerateCluster,
              "every product of cluster gradients vanishes; the cluster is numerically suspect");
}

PerturbationPlan ConstructMultiPointB(const CoefficientField &a, const PlanewaveBasis &basis,
                                      const std::vector<SplitTarget> &targets,
                                      const MultiPointOptions &opts)
{
  Require(!targets.empty(), ErrorCode::InvalidArgument, "no targets");
  const int d = basis.Dimension();
  const int n_basis = basis.Size();
  const double alpha = a.CoercivityAlpha();

  struct TargetState
  {
    RVector eta;
    double tol = 0.0;
    CMatrix h_cur;
    Cluster initial;
    std::vector<std::pair<int, int>> subs;  // 0-based (first, h)
  };
  std::vector<TargetState> states;
  for (const auto &t : targets)
  {
    TargetState s;
    s.eta = ReduceToDualCell(t.eta);
    s.tol = ToleranceFor(t.lambda0, opts.cluster_tol);
    s.h_cur = AssembleFiber(a, basis, s.eta).h;
    s.initial = ClusterFromPairs(EigenFiber(s.h_cur, n_basis), t.lambda0, s.tol);
    s.subs.emplace_back(s.initial.first_band - 1, s.initial.h);
    states.push_back(std::move(s));
  }

  auto max_h = [&]()
  {
    int m = 1;
    for (const auto &s : states)
    {
      for (const auto &sub : s.subs)
      {
        m = std::max(m, sub.second);
      }
    }
    return m;
  };

  PerturbationPlan plan;
  plan.sign = 1;
  plan.budget = opts.eps_budget > 0.0 ? opts.eps_budget : 0.01 * alpha;
  plan.construction = "multi_point";
  PerturbationField total = PerturbationField::Zero(d);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int iter = 0; max_h() > 1; iter++)
  {
    Require(iter < opts.max_iterations, ErrorCode::RetriesExhausted,
            "multiplicity persists after " + std::to_string(iter) + " iterations");
    const int h_before = max_h();

    // Product function p_n for every degenerate sub-cluster.
    struct Site
    {
      int state;
      int first;
      int h;
      CMatrix vectors;
      FourierSeries p;
    };
    std::vector<Site> sites;
    for (int si = 0; si < static_cast<int>(states.size()); si++)
    {
      auto &s = states[si];
      const EigenPairs ep = EigenFiber(s.h_cur, n_basis);
      for (const auto &[first, h] : s.subs)
      {
        if (h < 2)
        {
          continue;
        }
        Site site{si, first, h, ep.vectors.middleCols(first, h), {}};
        std::vector<std::vector<FourierSeries>> grads;
        for (int i = 0; i < h; i++)
        {
          grads.push_back(GradientSeries(site.vectors.col(i), basis, s.eta));
        }
        bool found = false;
        for (int i = 0; i < h && !found; i++)
        {
          for (int j = i + 1; j < h && !found; j++)
          {
            FourierSeries g(d, 0);
            FourierSeries fb(d, 0);
            for (int l = 0; l < d; l++)
            {
              g += Multiply(grads[i][l], Conjugate(grads[j][l]));
              fb += Multiply(grads[i][l], Conjugate(grads[i][l]));
              FourierSeries sq = Multiply(grads[j][l], Conjugate(grads[j][l]));
              sq *= -1.0;
              fb += sq;
            }
            for (const FourierSeries &cand :
                 {g.RealPart().Truncated(opts.b_cutoff), g.ImagPart().Truncated(opts.b_cutoff),
                  fb.RealPart().Truncated(opts.b_cutoff)})
            {
              if (cand.AbsSum() > opts.tol)
              {
                site.p = cand;
                found = true;
                break;
              }
            }
          }
        }
        Require(found, ErrorCode::DegenerateCluster,
                "no nonvanishing product function at a target cluster");
        sites.push_back(std::move(site));
      }
    }

    bool accepted = false;
    int attempts = 0;
    for (; attempts < opts.max_retries && !accepted;)
    {
      attempts++;
      FourierSeries beta(d, opts.b_cutoff);
      for (const auto &site : sites)
      {
        FourierSeries term = site.p;
        term *= normal(rng);
        beta += term;
      }
      const double beta_norm = std::sqrt(std::max(0.0, beta.IntegrateProduct(beta)));
      bool ok = beta_norm > 0.0;
      for (const auto &site : sites)
      {
        const double pn = std::sqrt(site.p.IntegrateProduct(site.p));
        ok = ok && std::abs(beta.IntegrateProduct(site.p)) > opts.accept_tol * beta_norm * pn;
      }
      if (!ok)
      {
        continue;
      }
      PerturbationField b = PerturbationField::Scalar(beta);
      b = b.Scaled(1.0 / b.SupNorm());

      double t = a.AdmissibleStep(b) / 10.0;
      double t_split = 0.0;
      for (const auto &site : sites)
      {
        const RVector slopes =
            FirstOrderSlopes(BuildSplittingMatrix(b, basis, states[site.state].eta, site.vectors));
        const double spread = Spread(slopes);
        if (spread <= opts.tol)
        {
          ok = false;
          break;
        }
        t_split = std::max(t_split, 10.0 * states[site.state].tol / spread);
      }
      if (!ok)
      {
        continue;
      }
      t = std::min(t, t_split);
      Require(plan.budget_used + t < plan.budget, ErrorCode::RetriesExhausted,
              "perturbation budget " + std::to_string(plan.budget) + " exhausted");

      // Apply and re-cluster; keep the draw only if every site loses
      // multiplicity.
      std::vector<CMatrix> h_new;
      std::vector<std::vector<std::pair<int, int>>> subs_new;
      for (const auto &s : states)
      {
        CMatrix h = s.h_cur + t * AssembleFiber(b, basis, s.eta).h;
        int top = 0;
        for (const auto &sub : s.subs)
        {
          top = std::max(top, sub.first + sub.second);
        }
        const RVector v = FiberEigenvalues(h, top);
        std::vector<std::pair<int, int>> parts;
        for (const auto &[first, hh] : s.subs)
        {
          for (const auto &p : Partition(v, first, hh, s.tol))
          {
            parts.push_back(p);
          }
        }
        h_new.push_back(std::move(h));
        subs_new.push_back(std::move(parts));
      }
      for (const auto &site : sites)
      {
        for (const auto &[first, hh] : subs_new[site.state])
        {
          if (first >= site.first && first < site.first + site.h && hh >= site.h)
          {
            ok = false;
          }
        }
      }
      if (!ok)
      {
        continue;
      }
      for (std::size_t i = 0; i < states.size(); i++)
      {
        states[i].h_cur = std::move(h_new[i]);
        states[i].subs = std::move(subs_new[i]);
      }
      total = total.Plus(b, t);
      plan.budget_used += t;
      PlanStep step;
      step.b = b;
      step.t = t;
      step.max_h_before = h_before;
      step.max_h_after = max_h();
      step.attempts = attempts;
      plan.steps.push_back(step);
      accepted = true;
    }
    Require(accepted, ErrorCode::RetriesExhausted,
            "no admissible beta after " + std::to_string(opts.max_retries) + " draws");
  }

  if (plan.steps.empty())
  {
    plan.b = PerturbationField::Zero(d);
    plan.t0 = 0.0;
    plan.sigma0 = a.AdmissibleStep(plan.b);
  }
  else
  {
    plan.t0 = total.SupNorm();
    plan.b = total.Scaled(1.0 / plan.t0);
    plan.sigma0 = a.AdmissibleStep(plan.b);
  }
  plan.t_lin = plan.t0;
  for (const auto &s : states)
  {
    PlanTarget target;
    target.eta = s.eta;
    target.lambda0 = ClusterMean(s.initial);
    target.first_band = s.initial.first_band;
    target.h = s.initial.h;
    target.slopes = FirstOrderSlopes(BuildSplittingMatrix(plan.b, basis, s.eta, s.initial.vectors));
    target.spread = Spread(target.slopes);
    plan.targets.push_back(target);
  }
  return plan;
}

BranchWindow DefaultWindow(const EigenPairs &pairs, const Cluster &cluster)
{
  const double lo_val = cluster.values.minCoeff();
  const double hi_val = cluster.values.maxCoeff();
  const double pad = std::max(1.0, std::abs(hi_val));
  const int below = cluster.first_band - 2;
  const int above = cluster.first_band - 1 + cluster.h;
  BranchWindow w;
  w.lo = below >= 0 ? 0.5 * (pairs.values(below) + lo_val) : lo_val - pad;
  w.hi = above < pairs.values.size() ? 0.5 * (pairs.values(above) + hi_val) : hi_val + pad;
  return w;
}

namespace
{

// Eigenvectors inside the window matched to the previous branch vectors.
// Returns false when some best overlap is below the threshold.
bool MatchStep(const CMatrix &h, const CMatrix &prev, const BranchWindow &window, CMatrix &next,
               RVector &values, RVector &overlaps)
{
  constexpr double kMinOverlap = 0.6;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  Require(es.info() == Eigen::Success, ErrorCode::SolverFailure, "eigensolver failed");
  std::vector<int> inside;
  for (int i = 0; i < es.eigenvalues().size(); i++)
  {
    const double v = es.eigenvalues()(i);
    if (v >= window.lo && v <= window.hi)
    {
      inside.push_back(i);
    }
  }
  const int nb = static_cast<int>(prev.cols());
  Require(static_cast<int>(inside.size()) == nb, ErrorCode::WindowBreach,
          std::to_string(inside.size()) + " eigenvalues inside the window, expected " +
              std::to_string(nb));
  RMatrix ov(nb, nb);
  for (int b = 0; b < nb; b++)
  {
    for (int c = 0; c < nb; c++)
    {
      ov(b, c) = std::abs(prev.col(b).dot(es.eigenvectors().col(inside[c])));
    }
  }
  next.resize(prev.rows(), nb);
  values.resize(nb);
  overlaps.resize(nb);
  std::vector<bool> row_used(nb, false), col_used(nb, false);
  for (int k = 0; k < nb; k++)
  {
    double best = -1.0;
    int br = -1, bc = -1;
    for (int b = 0; b < nb; b++)
    {
      for (int c = 0; c < nb; c++)
      {
        if (!row_used[b] && !col_used[c] && ov(b, c) > best)
        {
          best = ov(b, c);
          br = b;
          bc = c;
        }
      }
    }
    if (best < kMinOverlap)
    {
      return false;
    }
    row_used[br] = col_used[bc] = true;
    CVector v = es.eigenvectors().col(inside[bc]);
    const cplx phase = prev.col(br).dot(v);
    v *= std::conj(phase) / std::abs(phase);
    next.col(br) = v;
    values(br) = es.eigenvalues()(inside[bc]);
    overlaps(br) = best;
  }
  return true;
}

}  // namespace

std::vector<RellichBranch> TrackBranches(const CMatrix &h_a, const CMatrix &h_b,
                                         const CMatrix &cluster_vectors,
                                         const std::vector<double> &t_grid,
                                         const BranchWindow &window)
{
  const int nb = static_cast<int>(cluster_vectors.cols());
  Require(nb >= 1, ErrorCode::InvalidArgument, "empty cluster");
  const CMatrix g0 = cluster_vectors.adjoint() * h_b * cluster_vectors;
  Eigen::SelfAdjointEigenSolver<CMatrix> gs(0.5 * (g0 + g0.adjoint()));
  const CMatrix v0 = cluster_vectors * gs.eigenvectors();
  const CMatrix rq = v0.adjoint() * h_a * v0;

  std::vector<double> grid = t_grid;
  grid.push_back(0.0);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<std::map<double, std::pair<double, double>>> rec(nb);
  for (int b = 0; b < nb; b++)
  {
    rec[b][0.0] = {rq(b, b).real(), 1.0};
  }

  auto walk = [&](const std::vector<double> &targets)
  {
    CMatrix v = v0;
    double cur = 0.0;
    for (double target : targets)
    {
      RVector vals, ovs;
      while (cur != target)
      {
        const double step = target - cur;
        bool moved = false;
        for (int r = 0; r <= 8 && !moved; r++)
        {
          const double t_try = r == 0 ? target : cur + std::ldexp(step, -r);
          CMatrix next;
          if (MatchStep(h_a + t_try * h_b, v, window, next, vals, ovs))
          {
            v = next;
            cur = t_try;
            moved = true;
          }
        }
        Require(moved, ErrorCode::BranchCollision,
                "overlap below 0.6 after 8 step halvings near t = " + std::to_string(cur));
      }
      for (int b = 0; b < nb; b++)
      {
        rec[b][target] = {vals(b), ovs(b)};
      }
    }
  };

  std::vector<double> pos, neg;
  for (double t : grid)
  {
    if (t > 0.0)
    {
      pos.push_back(t);
    }
    else if (t < 0.0)
    {
      neg.push_back(t);
    }
  }
  std::reverse(neg.begin(), neg.end());
  walk(pos);
  walk(neg);

  auto lookup = [&](int b, double t, double &out)
  {
    for (const auto &[key, val] : rec[b])
    {
      if (std::abs(key - t) <= 1e-12 * std::max(1.0, std::abs(t)))
      {
        out = val.first;
        return true;
      }
    }
    return false;
  };

  std::vector<RellichBranch> branches(nb);
  for (int b = 0; b < nb; b++)
  {
    for (double t : t_grid)
    {
      const auto &entry = rec[b].at(t);
      branches[b].t.push_back(t);
      branches[b].values.push_back(entry.first);
      branches[b].overlaps.push_back(entry.second);
    }
    double s = 0.0;
    for (double t : pos)
    {
      double tmp;
      if (lookup(b, -t, tmp))
      {
        s = t;
        break;
      }
    }
    branches[b].slope = gs.eigenvalues()(b);
    if (s > 0.0)
    {
      double fp = 0.0, fm = 0.0, fp2 = 0.0, fm2 = 0.0;
      lookup(b, s, fp);
      lookup(b, -s, fm);
      if (lookup(b, 2 * s, fp2) && lookup(b, -2 * s, fm2))
      {
        branches[b].slope = (-fp2 + 8.0 * fp - 8.0 * fm + fm2) / (12.0 * s);
      }
      else
      {
        branches[b].slope = (fp - fm) / (2.0 * s);
      }
    }
  }
  return branches;
}

std::vector<RellichBranch> TrackBranches(const CoefficientField &a, const PerturbationField &b,
                                         const PlanewaveBasis &basis, const RVector &eta,
                                         const Cluster &cluster, const std::vector<double> &t_grid,
                                         const BranchWindow &window)
{
  const double sigma0 = a.AdmissibleStep(b);
  for (double t : t_grid)
  {
    Require(std::abs(t) < sigma0, ErrorCode::StepTooLarge,
            "t = " + std::to_string(t) + " outside the admissible range");
  }
  return TrackBranches(AssembleFiber(a, basis, eta).h, AssembleFiber(b, basis, eta).h,
                       cluster.vectors, t_grid, window);
}

namespace
{

// Band-m values of fiber(A) + t fiber(B) at every grid node.
RVector BandOnGrid(const CoefficientField &a, const PerturbationField &b, double t,
                   const PlanewaveBasis &basis, const BrillouinGrid &grid, int band, int threads)
{
  RVector out(grid.Size());
  ParallelFor(grid.Size(), threads,
              [&](int i)
              {
                const RVector eta = grid.Node(i);
                CMatrix h = AssembleFiber(a, basis, eta).h;
                if (t != 0.0)
                {
                  h += t * AssembleFiber(b, basis, eta).h;
                }
                out(i) = FiberEigenvalues(h, band)(band - 1);
              });
  return out;
}

}  // namespace

ContainmentReport EdgeContainmentCheck(const CoefficientField &a, const PerturbationField &b,
                                       const PlanewaveBasis &basis, const BrillouinGrid &grid,
                                       int band, EdgeSide side, const std::vector<double> &t_list,
                                       const std::vector<RVector> &edge_points, double delta,
                                       int threads)
{
  Require(band >= 1 && band <= basis.Size(), ErrorCode::InvalidArgument, "band out of range");
  Require(!edge_points.empty(), ErrorCode::InvalidArgument, "no edge points");
  const double sgn = side == EdgeSide::Upper ? 1.0 : -1.0;
  ContainmentReport rep;
  rep.delta = delta;

  double c_max = 0.0;
  for (int i = 0; i < grid.Size(); i++)
  {
    c_max = std::max(c_max, ShiftedLaplacianEigs(basis, grid.Node(i), band).back());
  }
  const RVector base = BandOnGrid(a, b, 0.0, basis, grid, band, threads);
  const double lambda_base = sgn > 0 ? base.minCoeff() : base.maxCoeff();

  for (double t : t_list)
  {
    ContainmentEntry e;
    e.t = t;
    const RVector v = t == 0.0 ? base : BandOnGrid(a, b, t, basis, grid, band, threads);
    e.lambda0 = sgn > 0 ? v.minCoeff() : v.maxCoeff();
    const double tol = DefaultClusterTol(e.lambda0);
    for (int i = 0; i < grid.Size(); i++)
    {
      if (std::abs(v(i) - e.lambda0) > tol)
      {
        continue;
      }
      const RVector eta = grid.Node(i);
      e.minimizers.push_back(eta);
      double dist = std::numeric_limits<double>::infinity();
      for (const auto &p : edge_points)
      {
        dist = std::min(dist, PeriodicDistance(eta, p));
      }
      if (dist > delta)
      {
        e.escaping.push_back(eta);
      }
    }
    e.contained = e.escaping.empty();
    e.shift = std::abs(e.lambda0 - lambda_base);
    e.shift_bound = grid.Dimension() * c_max * b.SupNorm() * std::abs(t);
    e.shift_ok = e.shift <= e.shift_bound + 1e-10;
    rep.all_contained = rep.all_contained && e.contained;
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

bool BandSimpleAt(const RVector &values, int band, double cluster_tol, double *gap)
{
  double g = std::numeric_limits<double>::infinity();
  if (band >= 2)
  {
    g = std::min(g, values(band - 1) - values(band - 2));
  }
  if (values.size() > band)
  {
    g = std::min(g, values(band) - values(band - 1));
  }
  if (gap)
  {
    *gap = g;
  }
  return g > cluster_tol;
}

FiberedPlan FiberedGlobalPerturbation(const CoefficientField &a, const PlanewaveBasis &basis,
                                      const BrillouinGrid &grid, int band, int b_cutoff,
                                      int threads)
{
  Require(band >= 1 && band < basis.Size(), ErrorCode::InvalidArgument, "band out of range");
  const int d = basis.Dimension();
  const int n_vals = band + 1;
  FiberedPlan plan;
  plan.band = band;

  BandOptions bo;
  bo.threads = threads;
  const BandStructure bands = ComputeBands(a, basis, grid, n_vals, bo);
  const int n = grid.Size();
  std::vector<bool> simple(n);
  for (int i = 0; i < n; i++)
  {
    const RVector v = bands.values.row(i).transpose();
    simple[i] = BandSimpleAt(v, band, DefaultClusterTol(v(band - 1)));
  }
  plan.cluster_tol = DefaultClusterTol(bands.sigma_plus(band - 1));

  plan.node_cell.assign(n, -1);
  FiberedCell base;
  base.b = PerturbationField::Zero(d);
  for (int i = 0; i < n; i++)
  {
    if (simple[i])
    {
      base.nodes.push_back(i);
      plan.node_cell[i] = 0;
    }
  }
  if (!base.nodes.empty())
  {
    plan.cells.push_back(std::move(base));
  }

  auto simple_with = [&](int node, const PerturbationField &b, double t)
  {
    const RVector eta = grid.Node(node);
    const CMatrix h = AssembleFiber(a, basis, eta).h + t * AssembleFiber(b, basis, eta).h;
    const RVector v = FiberEigenvalues(h, n_vals);
    return BandSimpleAt(v, band, DefaultClusterTol(v(band - 1)));
  };

  for (int seed = 0; seed < n; seed++)
  {
    if (plan.node_cell[seed] >= 0)
    {
      continue;
    }
    const RVector eta = grid.Node(seed);
    const double lambda = bands.Value(seed, band);
    const Cluster cluster = MultiplicityAt(a, basis, eta, lambda);

    PerturbationField b;
    double t = 0.0;
    bool ok = false;
    try
    {
      SplitOptions so;
      so.b_cutoff = b_cutoff;
      const PerturbationPlan p = ConstructSplittingB(a, basis, eta, cluster, so);
      b = p.b;
      t = p.t0;
      ok = simple_with(seed, b, t);
    }
    catch (const Error &e)
    {
      spdlog::debug("single splitting failed at node {}: {}", seed, e.what());
    }
    if (!ok)
    {
      try
      {
        MultiPointOptions mo;
        mo.b_cutoff = b_cutoff;
        const PerturbationPlan p = ConstructMultiPointB(a, basis, {{eta, lambda}}, mo);
        b = p.b;
        t = p.t0;
        ok = simple_with(seed, b, t);
      }
      catch (const Error &e)
      {
        spdlog::debug("iterated splitting failed at node {}: {}", seed, e.what());
      }
    }
    Require(ok, ErrorCode::CoverFailure,
            "no perturbation makes band " + std::to_string(band) + " simple at node " +
                std::to_string(seed));

    FiberedCell cell;
    cell.b = b;
    cell.t = t;
    cell.seed_node = seed;
    const int id = static_cast<int>(plan.cells.size());
    std::deque<int> queue{seed};
    plan.node_cell[seed] = id;
    while (!queue.empty())
    {
      const int cur = queue.front();
      queue.pop_front();
      cell.nodes.push_back(cur);
      for (int nb : grid.Neighbors(cur))
      {
        if (plan.node_cell[nb] < 0 && simple_with(nb, b, t))
        {
          plan.node_cell[nb] = id;
          queue.push_back(nb);
        }
      }
    }
    std::sort(cell.nodes.begin(), cell.nodes.end());
    plan.cells.push_back(std::move(cell));
  }

  plan.node_gap.assign(n, 0.0);
  std::vector<char> cert(n, 0);
  ParallelFor(n, threads,
              [&](int i)
              {
                const FiberedCell &cell = plan.cells[plan.node_cell[i]];
                const RVector eta = grid.Node(i);
                CMatrix h = AssembleFiber(a, basis, eta).h;
                if (cell.t != 0.0)
                {
                  h += cell.t * AssembleFiber(cell.b, basis, eta).h;
                }
                const RVector v = FiberEigenvalues(h, n_vals);
                cert[i] = BandSimpleAt(v, band, DefaultClusterTol(v(band - 1)), &plan.node_gap[i]);
              });
  plan.certified = std::all_of(cert.begin(), cert.end(), [](char c) { return c != 0; });
  return plan;
}

FourierSeries RaisedCosineBump(const RVector &y0, int p)
{
  Require(p >= 1, ErrorCode::InvalidArgument, "bump order must be positive");
  const int d = y0.size();
  // ((1 + cos x)/2)^p = 4^-p sum_j C(2p, p+j) e^{ijx}; scaled to unit mass.
  std::vector<double> w(2 * p + 1);
  for (int j = -p; j <= p; j++)
  {
    w[j + p] = std::exp(std::lgamma(p + 1.0) * 2.0 - std::lgamma(p + j + 1.0) -
                        std::lgamma(p - j + 1.0)) /
               kTwoPi;
  }
  FourierSeries out(d, p);
  const auto &lat = out.Lattice();
  for (int q = 0; q < lat.Size(); q++)
  {
    const LatticeIndex k = lat.Index(q);
    cplx c = 1.0;
    for (int i = 0; i < d; i++)
    {
      c *= w[k[i] + p] * std::exp(cplx(0.0, -k[i] * y0(i)));
    }
    out.Data()[q] = c;
  }
  return out;
}

EdgeSplitResult EdgeSplitW1Inf(const CoefficientField &a, const PlanewaveBasis &basis,
                               const BrillouinGrid &grid, const RVector &eta_hat, double lambda0,
                               int bump_cutoff, const EdgeSplitOptions &opts)
{
  const int d = basis.Dimension();
  const RVector eta = ReduceToDualCell(eta_hat);
  const CMatrix h_a = AssembleFiber(a, basis, eta).h;
  const Cluster cluster = ClusterFromPairs(EigenFiber(h_a, basis.Size()), lambda0);
  Require(cluster.h == 2, ErrorCode::InvalidArgument,
          "edge multiplicity " + std::to_string(cluster.h) + " at the edge point, expected 2");
  EdgeSplitResult res;
  res.band = cluster.first_band;
  const int m = res.band;

  std::vector<std::vector<FourierSeries>> grads;
  for (int i = 0; i < 2; i++)
  {
    grads.push_back(GradientSeries(cluster.vectors.col(i), basis, eta));
  }

  // Scan for the largest gradient density of the cluster.
  const int n_scan = opts.scan_points > 0 ? opts.scan_points
                                          : std::max(64, 8 * (2 * basis.Cutoff() + 1));
  const int n_pts = d == 1 ? n_scan : n_scan * n_scan;
  auto scan_point = [&](int q)
  {
    RVector y(d);
    y(0) = kTwoPi * (q % n_scan) / n_scan;
    if (d == 2)
    {
      y(1) = kTwoPi * (q / n_scan) / n_scan;
    }
    return y;
  };
  // vals[q][l][i] = (d_l + i eta_l) f_i at scan point q.
  std::vector<cplx> vals(static_cast<std::size_t>(n_pts) * d * 2);
  ParallelFor(n_pts, opts.threads,
              [&](int q)
              {
                const RVector y = scan_point(q);
                for (int l = 0; l < d; l++)
                {
                  for (int i = 0; i < 2; i++)
                  {
                    vals[(static_cast<std::size_t>(q) * d + l) * 2 + i] = grads[i][l].Evaluate(y);
                  }
                }
              });
  auto at = [&](int q, int l, int i) { return vals[(static_cast<std::size_t>(q) * d + l) * 2 + i]; };
  int best_q = 0;
  for (int q = 0; q < n_pts; q++)
  {
    for (int l = 0; l < d; l++)
    {
      const double w = std::norm(at(q, l, 0)) + std::norm(at(q, l, 1));
      if (w > res.theta)
      {
        res.theta = w;
        best_q = q;
        res.direction = l;
      }
    }
  }
  Require(res.theta > opts.tol, ErrorCode::NoBumpSite,
          "cluster gradients vanish on the scan grid");
  res.y0 = scan_point(best_q);
  const int l = res.direction;
  const cplx g0 = at(best_q, l, 0);
  const cplx g1 = at(best_q, l, 1);
  const double root = std::sqrt(res.theta);

  // Radius where both continuity conditions hold around y0.
  auto periodic_dist = [&](const RVector &y)
  {
    double s = 0.0;
    for (int i = 0; i < d; i++)
    {
      double dy = std::fmod(std::abs(y(i) - res.y0(i)), kTwoPi);
      dy = std::min(dy, kTwoPi - dy);
      s += dy * dy;
    }
    return std::sqrt(s);
  };
  res.eps0 = std::sqrt(static_cast<double>(d)) * kTwoPi / 2.0;
  for (int q = 0; q < n_pts; q++)
  {
    const cplx a0 = at(q, l, 0);
    const cplx a1 = at(q, l, 1);
    const double grad_phi = std::norm((std::conj(g0) * a0 + std::conj(g1) * a1) / root);
    const double drift = std::norm(a0 - g0) + std::norm(a1 - g1);
    if (grad_phi <= 2.0 * res.theta / 3.0 || drift >= res.theta / 3.0)
    {
      res.eps0 = std::min(res.eps0, periodic_dist(scan_point(q)));
    }
  }

  const FourierSeries bump = RaisedCosineBump(res.y0, bump_cutoff);
  res.bump_integral = std::pow(kTwoPi, d) * bump[{0, 0}].real();
  double inside = 0.0;
  const double cell = std::pow(kTwoPi / n_scan, d);
  for (int q = 0; q < n_pts; q++)
  {
    const RVector y = scan_point(q);
    if (periodic_dist(y) < res.eps0)
    {
      inside += bump.Evaluate(y).real() * cell;
    }
  }
  res.mass_inside = inside;

  const PerturbationField b = PerturbationField::DiagonalSlot(bump, d, l);
  PerturbationPlan &plan = res.plan;
  plan.b = b;
  plan.sign = -1;
  plan.construction = "bump";
  plan.sigma0 = a.AdmissibleStep(b);
  PlanTarget target;
  target.eta = eta;
  target.lambda0 = lambda0;
  target.first_band = m;
  target.h = 2;
  target.slopes = -FirstOrderSlopes(BuildSplittingMatrix(b, basis, eta, cluster.vectors));
  std::sort(target.slopes.data(), target.slopes.data() + target.slopes.size());
  target.spread = Spread(target.slopes);
  plan.targets.push_back(target);

  const CMatrix h_b = AssembleFiber(b, basis, eta).h;
  double top = plan.sigma0 / 10.0;
  for (int shift = 0; shift <= opts.shifts && !res.verified; shift++, top /= 10.0)
  {
    std::vector<EdgeSplitRow> rows;
    bool all = true;
    for (int k = 0; k <= opts.t_per_decade; k++)
    {
      EdgeSplitRow row;
      row.t = top * std::pow(10.0, -static_cast<double>(k) / opts.t_per_decade);
      row.lambda_m = FiberEigenvalues(h_a - row.t * h_b, m)(m - 1);
      row.bound_m = lambda0 - 7.0 * res.theta * row.t / 12.0;
      RVector upper(grid.Size());
      ParallelFor(grid.Size(), opts.threads,
                  [&](int i)
                  {
                    const RVector e = grid.Node(i);
                    const CMatrix h = AssembleFiber(a, basis, e).h - row.t * AssembleFiber(b, basis, e).h;
                    upper(i) = FiberEigenvalues(h, m + 1)(m);
                  });
      row.min_lambda_m1 = std::min(upper.minCoeff(),
                                   FiberEigenvalues(h_a - row.t * h_b, m + 1)(m));
      row.bound_m1 = lambda0 - 5.0 * res.theta * row.t / 12.0;
      row.holds = row.lambda_m < row.bound_m && row.min_lambda_m1 > row.bound_m1;
      all = all && row.holds;
      rows.push_back(row);
    }
    res.rows.insert(res.rows.end(), rows.begin(), rows.end());
    if (all)
    {
      res.verified = true;
      plan.t0 = top;
    }
  }
  if (!res.verified)
  {
    throw Error(ErrorCode::VerificationFailed,
                "splitting estimates fail on every tested decade of t below sigma0/10");
  }
  plan.t_lin = plan.t0;
  return res;
}

}  // namespace blochkit
