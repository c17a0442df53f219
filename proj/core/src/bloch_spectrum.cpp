// SPDX-License-Identifier: Apache-2.0

#include "blochkit/bloch_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "blochkit/edge_model.hpp"
#include "blochkit/errors.hpp"
#include "blochkit/parallel.hpp"

namespace blochkit
{

BrillouinGrid::BrillouinGrid(int dim, int points_per_axis) : dim_(dim), m_(points_per_axis)
{
  Require(dim == 1 || dim == 2, ErrorCode::BadShape, "grid dimension must be 1 or 2");
  Require(points_per_axis >= 3, ErrorCode::InvalidArgument, "grid needs at least 3 points per axis");
  size_ = dim == 1 ? m_ : m_ * m_;
}

std::array<int, 2> BrillouinGrid::Coords(int i) const
{
  if (dim_ == 1)
  {
    return {i, 0};
  }
  return {i / m_, i % m_};
}

int BrillouinGrid::FromCoords(int c0, int c1) const
{
  c0 = ((c0 % m_) + m_) % m_;
  if (dim_ == 1)
  {
    return c0;
  }
  c1 = ((c1 % m_) + m_) % m_;
  return c0 * m_ + c1;
}

RVector BrillouinGrid::Node(int i) const
{
  const auto c = Coords(i);
  RVector eta(dim_);
  for (int l = 0; l < dim_; l++)
  {
    eta(l) = -0.5 + static_cast<double>(c[l]) / m_;
  }
  return eta;
}

std::vector<int> BrillouinGrid::Neighbors(int i) const
{
  const auto c = Coords(i);
  std::vector<int> out;
  if (dim_ == 1)
  {
    out = {FromCoords(c[0] - 1), FromCoords(c[0] + 1)};
    return out;
  }
  for (int a = -1; a <= 1; a++)
  {
    for (int b = -1; b <= 1; b++)
    {
      if (a != 0 || b != 0)
      {
        out.push_back(FromCoords(c[0] + a, c[1] + b));
      }
    }
  }
  return out;
}

int BrillouinGrid::Reflected(int i) const
{
  const auto c = Coords(i);
  return FromCoords(m_ - c[0], m_ - c[1]);
}

BrillouinGrid BrillouinGrid::Coarsened() const { return BrillouinGrid(dim_, std::max(3, m_ / 2)); }

namespace
{

void FixPhase(CMatrix &v)
{
  for (int c = 0; c < v.cols(); c++)
  {
    double best = 0.0;
    for (int r = 0; r < v.rows(); r++)
    {
      best = std::max(best, std::abs(v(r, c)));
    }
    // First entry within rounding of the largest magnitude.
    for (int r = 0; r < v.rows(); r++)
    {
      if (std::abs(v(r, c)) >= best * (1.0 - 1e-12))
      {
        const cplx z = v(r, c);
        v.col(c) *= std::conj(z) / std::abs(z);
        v(r, c) = std::abs(z);
        break;
      }
    }
  }
}

}  // namespace

EigenPairs EigenFiber(const CMatrix &h, int n)
{
  Require(h.rows() == h.cols(), ErrorCode::BadShape, "fiber matrix must be square");
  Require(n >= 1 && n <= h.rows(), ErrorCode::InvalidArgument,
          "requested eigenpair count out of range");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  Require(es.info() == Eigen::Success, ErrorCode::SolverFailure, "Hermitian eigensolver failed");
  EigenPairs out;
  out.values = es.eigenvalues().head(n);
  out.vectors = es.eigenvectors().leftCols(n);
  FixPhase(out.vectors);
  const CMatrix resid = h * out.vectors - out.vectors * out.values.asDiagonal();
  for (int c = 0; c < n; c++)
  {
    const double r = resid.col(c).norm();
    out.max_residual = std::max(out.max_residual, r / (1.0 + std::abs(out.values(c))));
    Require(r <= 1e-10 * (1.0 + std::abs(out.values(c))), ErrorCode::SolverFailure,
            "eigen residual " + std::to_string(r) + " too large");
  }
  const double gram = (out.vectors.adjoint() * out.vectors - CMatrix::Identity(n, n))
                          .cwiseAbs()
                          .maxCoeff();
  Require(gram <= 1e-10, ErrorCode::SolverFailure, "eigenvectors are not orthonormal");
  return out;
}

EigenPairs EigenFiber(const FiberMatrix &fiber, int n) { return EigenFiber(fiber.h, n); }

RVector FiberEigenvalues(const CMatrix &h, int n)
{
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  Require(es.info() == Eigen::Success, ErrorCode::SolverFailure, "Hermitian eigensolver failed");
  return es.eigenvalues().head(n);
}

BandStructure ComputeBands(const CoefficientField &field, const PlanewaveBasis &basis,
                           const BrillouinGrid &grid, int n_bands, const BandOptions &opts)
{
  Require(n_bands >= 1 && n_bands <= basis.Size(), ErrorCode::InvalidArgument,
          "band count must be within the basis size");
  Require(grid.Dimension() == basis.Dimension(), ErrorCode::BadShape,
          "grid and basis dimensions differ");
  BandStructure bs;
  bs.grid = grid;
  bs.n_bands = n_bands;
  bs.values.resize(grid.Size(), n_bands);
  if (opts.store_vectors)
  {
    bs.vectors.resize(grid.Size());
  }
  std::vector<double> residuals(grid.Size(), 0.0);
  ParallelFor(grid.Size(), opts.threads,
              [&](int i)
              {
                try
                {
                  const FiberMatrix fm = AssembleFiber(field, basis, grid.Node(i), opts.rule);
                  EigenPairs ep = EigenFiber(fm, n_bands);
                  bs.values.row(i) = ep.values.transpose();
                  residuals[i] = ep.max_residual;
                  if (opts.store_vectors)
                  {
                    bs.vectors[i] = std::move(ep.vectors);
                  }
                }
                catch (const Error &e)
                {
                  throw Error(e.code(), "at grid node " + std::to_string(i) + ": " + e.what());
                }
              });
  bs.sigma_minus = bs.values.colwise().minCoeff().transpose();
  bs.sigma_plus = bs.values.colwise().maxCoeff().transpose();
  bs.max_residual = *std::max_element(residuals.begin(), residuals.end());
  return bs;
}

std::vector<SpectralGap> FindGaps(const BandStructure &bands, double rel_tol)
{
  std::vector<SpectralGap> gaps;
  for (int n = 1; n < bands.n_bands; n++)
  {
    const double lo = bands.sigma_plus(n - 1);
    const double hi = bands.sigma_minus(n);
    if (!(lo < hi - rel_tol * std::max(1.0, lo)))
    {
      continue;
    }
    SpectralGap g;
    g.lower = lo;
    g.upper = hi;
    g.band_below = n;
    const double tol_lo = 1e-10 * std::max(1.0, std::abs(lo));
    const double tol_hi = 1e-10 * std::max(1.0, std::abs(hi));
    for (int i = 0; i < bands.grid.Size(); i++)
    {
      if (bands.Value(i, n) >= lo - tol_lo)
      {
        g.lower_nodes.push_back(i);
      }
      if (bands.Value(i, n + 1) <= hi + tol_hi)
      {
        g.upper_nodes.push_back(i);
      }
    }
    gaps.push_back(std::move(g));
  }
  return gaps;
}

double DefaultClusterTol(double lambda0) { return 1e-6 * std::max(1.0, std::abs(lambda0)); }

Cluster ClusterFromPairs(const EigenPairs &pairs, double lambda0, double cluster_tol)
{
  const double tol = cluster_tol > 0.0 ? cluster_tol : DefaultClusterTol(lambda0);
  Cluster c;
  std::vector<int> members;
  for (int i = 0; i < pairs.values.size(); i++)
  {
    if (std::abs(pairs.values(i) - lambda0) <= tol)
    {
      members.push_back(i);
    }
  }
  Require(!members.empty(), ErrorCode::EmptyCluster,
          "no eigenvalue within " + std::to_string(tol) + " of " + std::to_string(lambda0));
  c.h = static_cast<int>(members.size());
  c.first_band = members.front() + 1;
  c.values.resize(c.h);
  c.vectors.resize(pairs.vectors.rows(), c.h);
  for (int j = 0; j < c.h; j++)
  {
    c.values(j) = pairs.values(members[j]);
    c.vectors.col(j) = pairs.vectors.col(members[j]);
  }
  return c;
}

Cluster MultiplicityAt(const CoefficientField &field, const PlanewaveBasis &basis,
                       const RVector &eta, double lambda0, double cluster_tol,
                       FactorizationRule rule)
{
  const FiberMatrix fm = AssembleFiber(field, basis, eta, rule);
  return ClusterFromPairs(EigenFiber(fm, basis.Size()), lambda0, cluster_tol);
}

ContinuityReport CheckContinuityBound(const CoefficientField &a1, const CoefficientField &a2,
                                      const PlanewaveBasis &basis, const RVector &eta, int n)
{
  Require(a1.Dimension() == a2.Dimension(), ErrorCode::BadShape, "dimension mismatch");
  ContinuityReport r;
  const RVector l1 = FiberEigenvalues(AssembleFiber(a1, basis, eta).h, n);
  const RVector l2 = FiberEigenvalues(AssembleFiber(a2, basis, eta).h, n);
  r.lhs = std::abs(l1(n - 1) - l2(n - 1));
  r.c_n = ShiftedLaplacianEigs(basis, ReduceToDualCell(eta), n).back();
  const int kc = std::max(a1.Cutoff(), a2.Cutoff());
  FourierMatrixTable diff(a1.Dimension(), kc);
  for (int p = 0; p < diff.Lattice().Size(); p++)
  {
    const LatticeIndex k = diff.Lattice().Index(p);
    diff.SetMode(k, a1.Coefficients().Mode(k) - a2.Coefficients().Mode(k));
  }
  const PerturbationField d = PerturbationField::FromFourier(diff);
  r.sup_difference = d.SampledMaxEntry(std::max(64, 32 * kc));
  r.rhs = a1.Dimension() * r.c_n * r.sup_difference;
  r.holds = r.lhs <= r.rhs + 1e-10;
  return r;
}

std::vector<int> GridLocalExtrema(const BandStructure &bands, int band, bool maxima)
{
  std::vector<int> out;
  const double sgn = maxima ? -1.0 : 1.0;
  for (int i = 0; i < bands.grid.Size(); i++)
  {
    const double v = sgn * bands.Value(i, band);
    bool ok = true;
    for (int j : bands.grid.Neighbors(i))
    {
      if (v > sgn * bands.Value(j, band))
      {
        ok = false;
        break;
      }
    }
    if (ok)
    {
      out.push_back(i);
    }
  }
  return out;
}

SpectralEdgeReport CertifyEdgeHypotheses(const CoefficientField &field,
                                         const PlanewaveBasis &basis,
                                         const BandStructure &bands, const SpectralGap &gap,
                                         EdgeSide side, const EdgeOptions &opts)
{
  SpectralEdgeReport rep;
  rep.side = side;
  const bool upper = side == EdgeSide::Upper;
  rep.band = upper ? gap.band_below + 1 : gap.band_below;
  Require(rep.band >= 1 && rep.band <= bands.n_bands, ErrorCode::InvalidArgument,
          "edge band outside computed bands");
  const double sgn = upper ? 1.0 : -1.0;
  const BandEvaluator band_eval = MakeBandEvaluator(field, basis, rep.band, opts.rule);
  const BandEvaluator eval = [&](const RVector &eta) { return sgn * band_eval(eta); };

  const BrillouinGrid &grid = bands.grid;
  struct Candidate
  {
    RVector eta;
    double value;
    int node;
    bool refined;
  };
  std::vector<Candidate> cands;
  for (int node : GridLocalExtrema(bands, rep.band, !upper))
  {
    Candidate c{grid.Node(node), sgn * bands.Value(node, rep.band), node, false};
    try
    {
      c.eta = RefineMinimizer(eval, c.eta, grid.Spacing(), opts.refine_tol);
      c.value = eval(c.eta);
      c.refined = true;
    }
    catch (const Error &e)
    {
      if (e.code() != ErrorCode::NotLocalMin)
      {
        throw;
      }
    }
    cands.push_back(std::move(c));
  }
  Require(!cands.empty(), ErrorCode::InvalidArgument, "edge band has no grid extremum");
  double best = std::numeric_limits<double>::infinity();
  for (const auto &c : cands)
  {
    best = std::min(best, c.value);
  }
  rep.lambda0 = sgn * best;
  rep.cluster_tol = opts.cluster_tol > 0.0 ? opts.cluster_tol : DefaultClusterTol(rep.lambda0);

  for (const auto &c : cands)
  {
    if (c.value > best + rep.cluster_tol)
    {
      continue;
    }
    bool dup = false;
    for (const auto &p : rep.points)
    {
      if (PeriodicDistance(p.eta, c.eta) < 0.25 * grid.Spacing())
      {
        dup = true;
        break;
      }
    }
    if (dup)
    {
      continue;
    }
    EdgePoint p;
    p.eta = ReduceToDualCell(c.eta);
    p.value = sgn * c.value;
    p.grid_node = c.node;
    p.refined = c.refined;
    p.multiplicity =
        MultiplicityAt(field, basis, p.eta, p.value, rep.cluster_tol, opts.rule).h;
    rep.points.push_back(std::move(p));
  }
  rep.simple = std::all_of(rep.points.begin(), rep.points.end(),
                           [](const EdgePoint &p) { return p.multiplicity == 1; });

  const int m = rep.band;
  if (upper)
  {
    const double below = m >= 2 ? bands.sigma_plus(m - 2) : 0.0;
    rep.delta = rep.lambda0 - below;
    rep.a = rep.lambda0 - 0.5 * rep.delta;
    rep.b = bands.sigma_plus(m - 1) + 0.5 * std::max(rep.delta, 0.0);
  }
  else
  {
    const double above = m < bands.n_bands ? bands.sigma_minus(m) : rep.lambda0;
    rep.delta = above - rep.lambda0;
    rep.b = rep.lambda0 + 0.5 * rep.delta;
    rep.a = bands.sigma_minus(m - 1) - 0.5 * std::max(rep.delta, 0.0);
  }
  return rep;
}

void WriteBandCsv(std::ostream &os, const BandStructure &bands,
                  const std::vector<std::string> &preamble)
{
  for (const auto &line : preamble)
  {
    os << "# " << line << '\n';
  }
  const int d = bands.grid.Dimension();
  os << "eta_1";
  if (d == 2)
  {
    os << ",eta_2";
  }
  for (int n = 1; n <= bands.n_bands; n++)
  {
    os << ",lambda_" << n;
  }
  os << '\n';
  char buf[64];
  for (int i = 0; i < bands.grid.Size(); i++)
  {
    const RVector eta = bands.grid.Node(i);
    for (int l = 0; l < d; l++)
    {
      std::snprintf(buf, sizeof(buf), "%.17e", eta(l));
      os << (l ? "," : "") << buf;
    }
    for (int n = 1; n <= bands.n_bands; n++)
    {
      std::snprintf(buf, sizeof(buf), "%.17e", bands.Value(i, n));
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace blochkit
