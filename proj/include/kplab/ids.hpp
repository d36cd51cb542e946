#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "kplab/core.hpp"
#include "kplab/sampling.hpp"
#include "kplab/transfer.hpp"

namespace kplab {

// Finite box [-L, L] with Dirichlet ends.  Cells are indexed n = -L..L-1 and
// the jump sits at the right end of its cell, so realization[k] feeds the
// jump at integer -L+k+1; the jump that would land on +L has no cell to its
// right and is excluded.  All 2L vectors are drawn so stream positions stay
// aligned with infinite-volume products.
struct DirichletDomain {
  int halfLength = 0;
  std::uint64_t seed = 0;
  std::vector<Vec> realization;

  int cells() const { return 2 * halfLength; }
  int jumps() const { return 2 * halfLength - 1; }
};

inline DirichletDomain makeDomain(const ModelConfig& cfg, const DistributionSpec& spec,
                                  std::uint64_t seed, int halfLength,
                                  std::uint64_t streamId = 0) {
  if (halfLength < 1) throw PreconditionError("makeDomain: halfLength must be >= 1");
  spec.validate();
  if (spec.n != cfg.n)
    throw PreconditionError("makeDomain: distribution channel count differs from model size");
  DirichletDomain dom;
  dom.halfLength = halfLength;
  dom.seed = seed;
  SampleStream stream(spec, seed, streamId);
  dom.realization = stream.sample(dom.cells());
  return dom;
}

struct ShootOptions {
  double baseStep = 0.02;
  int maxLevels = 4;          // grid halvings allowed while root sets disagree
  double refineTol = 1e-11;   // bisection width, relative to energy scale
  double rankTol = 1e-8;      // singular values below rankTol * sigma_max count as zero
  double dipLog = 3.4;        // log-magnitude drop that triggers a local re-scan
};

struct SpectralRoot {
  double energy = 0.0;
  int multiplicity = 1;
  bool flagged = false;  // degenerate root detected without a sign change
};

namespace detail {

struct ShootEval {
  double sign = 0.0;    // sign of det T12
  double logAbs = 0.0;  // log |det T12| with the renormalization folded back in
  Mat block;            // renormalized upper-right block, for rank queries
};

// Dirichlet solution frame T·[0;I] propagated cell by cell, with a QR
// refresh after every fold. The triangular factors absorb the growth, so
// the boundary determinant's sign and log-magnitude come out exact while
// the stored block keeps O(1) entries for rank queries. (Folding the raw
// 2N x 2N product instead lets the dominant channels swamp the N x N
// subdeterminant: past L ~ 15 its computed sign is rounding noise and the
// scan manufactures spurious roots.)
inline ShootEval shootDet(const DirichletDomain& dom, const ModelConfig& cfg, double e) {
  const int n = cfg.n;
  const Mat aFree = freeTransfer(cfg, e);
  Mat f = Mat::Zero(2 * n, n);
  f.bottomRows(n) = Mat::Identity(n, n);
  double logScale = 0.0;
  bool degenerate = false;
  // Each fold is canonicalized to m*Q_k = Q_{k+1} * R' with diag(R') > 0, so
  // the frame stays continuous in E and the accumulated triangular factor has
  // positive determinant: sign(det T12) lives entirely in the final block.
  const auto fold = [&](const Mat& m) {
    Eigen::HouseholderQR<Mat> qr(m * f);
    Mat q = qr.householderQ() * Mat::Identity(2 * n, n);
    for (int i = 0; i < n; ++i) {
      const double d = qr.matrixQR()(i, i);
      if (!std::isfinite(d)) throw BreakdownError("shootDet: frame degenerated");
      if (d == 0.0) {
        degenerate = true;
        continue;
      }
      if (d < 0.0) q.col(i) = -q.col(i);
      logScale += std::log(std::abs(d));
    }
    f = std::move(q);
  };
  for (int k = 0; k < dom.jumps(); ++k)
    fold(cellTransferMat(cfg, aFree, dom.realization[static_cast<std::size_t>(k)]));
  fold(aFree);
  ShootEval out;
  out.block = f.topRows(n);
  const double det = out.block.determinant();
  out.sign = degenerate ? 0.0 : (det > 0.0 ? 1.0 : (det < 0.0 ? -1.0 : 0.0));
  out.logAbs = (degenerate || det == 0.0) ? -1e300 : std::log(std::abs(det)) + logScale;
  return out;
}

inline int rankDeficiency(const Mat& block, double rankTol) {
  Eigen::JacobiSVD<Mat> svd(block);
  const auto& sv = svd.singularValues();
  const double top = sv(0);
  if (!(top > 0.0)) return static_cast<int>(block.rows());
  int d = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) < rankTol * top) ++d;
  return d;
}

inline double bisectRoot(const DirichletDomain& dom, const ModelConfig& cfg, double lo,
                         double hi, double sLo, double tol) {
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double sm = shootDet(dom, cfg, mid).sign;
    if (sm == 0.0) return mid;
    if (sm == sLo)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Sign-change roots on a fixed grid over [lo, hi].
inline std::vector<double> scanSignRoots(const DirichletDomain& dom, const ModelConfig& cfg,
                                         double lo, double hi, double step, double tol,
                                         std::vector<double>* gridE = nullptr,
                                         std::vector<ShootEval>* gridV = nullptr) {
  std::vector<double> es;
  std::vector<ShootEval> vs;
  for (double e = lo;; e += step) {
    if (e > hi) e = hi;
    ShootEval v = shootDet(dom, cfg, e);
    if (v.sign == 0.0) v = shootDet(dom, cfg, e + 1e-12);
    es.push_back(e);
    vs.push_back(std::move(v));
    if (e >= hi) break;
  }
  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < es.size(); ++i)
    if (vs[i].sign * vs[i + 1].sign < 0.0)
      roots.push_back(bisectRoot(dom, cfg, es[i], es[i + 1], vs[i].sign, tol));
  if (gridE) *gridE = std::move(es);
  if (gridV) *gridV = std::move(vs);
  return roots;
}

inline bool sameRootSet(const std::vector<double>& a, const std::vector<double>& b,
                        double sep) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > sep) return false;
  return true;
}

}  // namespace detail

// Lower bound for the Dirichlet spectrum: the bottom of the background band
// minus a margin for attractive jumps (a single jump of strength -s binds at
// depth s^2/4; densely packed jumps shift the bottom by at most s per unit
// length), verified by an inertia count and pushed down until it certifies
// zero eigenvalues.
inline int inertiaCount(const DirichletDomain& dom, const ModelConfig& cfg, double e, int m);

inline double spectrumFloor(const DirichletDomain& dom, const ModelConfig& cfg) {
  Eigen::SelfAdjointEigenSolver<Mat> es(cfg.v0);
  double sMinus = 0.0;
  for (const auto& omega : dom.realization)
    for (int i = 0; i < cfg.n; ++i) {
      const double q = cfg.couplings[i] * omega[i];
      sMinus = std::max(sMinus, -q);
    }
  double guess = es.eigenvalues().minCoeff() - std::max(sMinus, sMinus * sMinus) - 0.5;
  for (int tries = 0; tries < 64; ++tries) {
    if (inertiaCount(dom, cfg, guess, 64) == 0) return guess;
    guess -= 1.0;
  }
  throw BreakdownError("spectrumFloor: could not certify a spectrum-free energy");
}

// All Dirichlet eigenvalues <= eMax, with multiplicities, found as zeros of
// the upper-right shooting-determinant block.  The scan grid halves until two
// consecutive levels agree; deep dips of log|det| without a sign change are
// re-scanned locally and, if the block is rank-deficient at the minimum,
// recorded as flagged degenerate roots.
inline std::vector<SpectralRoot> dirichletSpectrumBelow(const DirichletDomain& dom,
                                                        const ModelConfig& cfg, double eMax,
                                                        const ShootOptions& opts = {}) {
  const double lo = spectrumFloor(dom, cfg);
  if (!(eMax > lo)) return {};
  const double tol = opts.refineTol * std::max(1.0, std::abs(eMax));

  std::vector<double> roots;
  double step = opts.baseStep;
  std::vector<double> gridE;
  std::vector<detail::ShootEval> gridV;
  {
    std::vector<double> prev =
        detail::scanSignRoots(dom, cfg, lo, eMax, step, tol);
    for (int level = 1; level <= opts.maxLevels; ++level) {
      step *= 0.5;
      std::vector<double> cur = detail::scanSignRoots(
          dom, cfg, lo, eMax, step, tol, level == opts.maxLevels ? &gridE : nullptr,
          level == opts.maxLevels ? &gridV : nullptr);
      const bool settled = detail::sameRootSet(prev, cur, 100.0 * tol);
      prev = std::move(cur);
      if (settled && level >= 2) {
        if (gridE.empty())
          detail::scanSignRoots(dom, cfg, lo, eMax, step, tol, &gridE, &gridV);
        break;
      }
    }
    roots = std::move(prev);
  }

  std::vector<SpectralRoot> out;
  for (double r : roots) {
    SpectralRoot sr;
    sr.energy = r;
    sr.multiplicity =
        std::max(1, detail::rankDeficiency(detail::shootDet(dom, cfg, r).block, opts.rankTol));
    out.push_back(sr);
  }

  // Local dip pass: an even-order zero leaves no sign change, only a valley.
  for (std::size_t i = 1; i + 1 < gridE.size(); ++i) {
    if (gridV[i - 1].sign * gridV[i].sign < 0.0 || gridV[i].sign * gridV[i + 1].sign < 0.0)
      continue;
    if (gridV[i].logAbs > gridV[i - 1].logAbs - opts.dipLog ||
        gridV[i].logAbs > gridV[i + 1].logAbs - opts.dipLog)
      continue;
    const double a = gridE[i - 1], b = gridE[i + 1];
    bool nearKnown = false;
    for (double r : roots)
      if (r > a - step && r < b + step) nearKnown = true;
    if (nearKnown) continue;
    const double fineStep = (b - a) / 50.0;
    std::vector<double> fineE;
    std::vector<detail::ShootEval> fineV;
    std::vector<double> found =
        detail::scanSignRoots(dom, cfg, a, b, fineStep, tol, &fineE, &fineV);
    if (!found.empty()) {
      for (double r : found) {
        SpectralRoot sr;
        sr.energy = r;
        sr.multiplicity = std::max(
            1, detail::rankDeficiency(detail::shootDet(dom, cfg, r).block, opts.rankTol));
        out.push_back(sr);
      }
      continue;
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < fineV.size(); ++j)
      if (fineV[j].logAbs < fineV[best].logAbs) best = j;
    const int def = detail::rankDeficiency(fineV[best].block, opts.rankTol);
    if (def > 0) {
      SpectralRoot sr;
      sr.energy = fineE[best];
      sr.multiplicity = def;
      sr.flagged = true;
      out.push_back(sr);
    }
  }

  std::sort(out.begin(), out.end(),
            [](const SpectralRoot& a, const SpectralRoot& b) { return a.energy < b.energy; });
  std::vector<SpectralRoot> dedup;
  for (const auto& sr : out) {
    if (!dedup.empty() && sr.energy - dedup.back().energy < 100.0 * tol) continue;
    if (sr.energy > eMax) continue;
    dedup.push_back(sr);
  }
  return dedup;
}

// Eigenvalues <= e of the Dirichlet problem, counted with multiplicity from
// the shooting determinant.
inline int shootCount(const DirichletDomain& dom, const ModelConfig& cfg, double e,
                      const ShootOptions& opts = {}) {
  int count = 0;
  for (const auto& r : dirichletSpectrumBelow(dom, cfg, e, opts)) count += r.multiplicity;
  return count;
}

// Independent counter: symmetric finite differences with mesh h = 1/m, the
// jump at an interior integer entering the diagonal as strength/h at that
// node.  The count is the inertia of the shifted matrix, accumulated through
// a block LDL^T sweep; a near-singular pivot jitters E by 1e-12 and retries.
inline int inertiaCount(const DirichletDomain& dom, const ModelConfig& cfg, double e, int m) {
  if (m < 50) throw PreconditionError("inertiaCount: need at least 50 mesh points per cell");
  const int n = cfg.n;
  const double h = 1.0 / m;
  const double invH2 = 1.0 / (h * h);
  const double invH4 = invH2 * invH2;
  const long long nodes = static_cast<long long>(2 * dom.halfLength) * m - 1;

  double shifted = e;
  for (int attempt = 0;; ++attempt) {
    bool broke = false;
    int negs = 0;
    if (n == 3) {
      using M3 = Eigen::Matrix3d;
      const M3 v0 = cfg.v0;
      M3 prevInv = M3::Zero();
      bool havePrev = false;
      Eigen::SelfAdjointEigenSolver<M3> es;
      for (long long k = 1; k <= nodes; ++k) {
        M3 d = v0;
        d.diagonal().array() += 2.0 * invH2 - shifted;
        if (k % m == 0) {
          const auto& omega = dom.realization[static_cast<std::size_t>(k / m - 1)];
          for (int i = 0; i < 3; ++i)
            d(i, i) += cfg.couplings[i] * omega[i] / h;
        }
        if (havePrev) d -= invH4 * prevInv;
        es.computeDirect(d);
        const auto& ev = es.eigenvalues();
        const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
        if (ev.cwiseAbs().minCoeff() < 1e-13 * scale || !ev.allFinite()) {
          broke = true;
          break;
        }
        for (int i = 0; i < 3; ++i) negs += ev(i) < 0.0;
        prevInv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
                  es.eigenvectors().transpose();
        havePrev = true;
      }
    } else if (n == 1) {
      const double v00 = cfg.v0(0, 0);
      double prevInv = 0.0;
      bool havePrev = false;
      for (long long k = 1; k <= nodes; ++k) {
        double d = 2.0 * invH2 + v00 - shifted;
        if (k % m == 0)
          d += cfg.couplings[0] * dom.realization[static_cast<std::size_t>(k / m - 1)][0] / h;
        if (havePrev) d -= invH4 * prevInv;
        if (std::abs(d) < 1e-13 * std::max(1.0, std::abs(d) + invH2) || !std::isfinite(d)) {
          broke = true;
          break;
        }
        negs += d < 0.0;
        prevInv = 1.0 / d;
        havePrev = true;
      }
    } else {
      Mat prevInv = Mat::Zero(n, n);
      bool havePrev = false;
      for (long long k = 1; k <= nodes; ++k) {
        Mat d = cfg.v0;
        d.diagonal().array() += 2.0 * invH2 - shifted;
        if (k % m == 0) {
          const auto& omega = dom.realization[static_cast<std::size_t>(k / m - 1)];
          for (int i = 0; i < n; ++i)
            d(i, i) += cfg.couplings[i] * omega[i] / h;
        }
        if (havePrev) d -= invH4 * prevInv;
        Eigen::SelfAdjointEigenSolver<Mat> es(d);
        const auto& ev = es.eigenvalues();
        const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
        if (ev.cwiseAbs().minCoeff() < 1e-13 * scale || !ev.allFinite()) {
          broke = true;
          break;
        }
        for (int i = 0; i < n; ++i) negs += ev(i) < 0.0;
        prevInv =
            es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
        havePrev = true;
      }
    }
    if (!broke) return negs;
    if (attempt >= 6) throw BreakdownError("inertiaCount: factorization kept breaking down");
    shifted += (attempt == 0 ? 1e-12 : std::pow(10.0, attempt) * 1e-12);
  }
}

struct IDSCurve {
  std::vector<double> grid;
  std::vector<long long> counts;
  std::vector<double> values;  // counts / (2L)
  int halfLength = 0;
  std::uint64_t seed = 0;
};

// One realization, one sweep: eigenvalues below the top grid energy are
// located once and tallied cumulatively at each grid point.
inline IDSCurve idsCurve(const ModelConfig& cfg, const DistributionSpec& spec,
                         std::uint64_t seed, int halfLength, const std::vector<double>& grid,
                         const ShootOptions& opts = {}) {
  if (grid.empty()) throw PreconditionError("idsCurve: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw PreconditionError("idsCurve: grid must be sorted");
  const DirichletDomain dom = makeDomain(cfg, spec, seed, halfLength);
  const auto roots = dirichletSpectrumBelow(dom, cfg, grid.back(), opts);

  IDSCurve curve;
  curve.grid = grid;
  curve.halfLength = halfLength;
  curve.seed = seed;
  curve.counts.reserve(grid.size());
  curve.values.reserve(grid.size());
  std::size_t idx = 0;
  long long running = 0;
  for (double e : grid) {
    while (idx < roots.size() && roots[idx].energy <= e) {
      running += roots[idx].multiplicity;
      ++idx;
    }
    curve.counts.push_back(running);
    curve.values.push_back(static_cast<double>(running) / (2.0 * halfLength));
  }
  return curve;
}

// Dirichlet count for the free scalar problem on [-L, L]: eigenvalues
// (k pi / 2L)^2, k >= 1.
inline long long freeDirichletCount(int halfLength, double e) {
  if (!(e > 0.0)) return 0;
  return static_cast<long long>(std::floor(2.0 * halfLength * std::sqrt(e) / kPi));
}

}  // namespace kplab
