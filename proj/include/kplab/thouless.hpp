#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kplab/core.hpp"
#include "kplab/ids.hpp"
#include "kplab/lyapunov.hpp"
#include "kplab/sampling.hpp"
#include "kplab/transfer.hpp"

namespace kplab {

// Binned state-density measure: masses are increments of a normalized
// counting curve, so the total equals the curve's rise over the window.
struct DOSMeasure {
  std::vector<double> binEdges;  // size bins + 1, strictly increasing
  std::vector<double> masses;    // size bins, nonnegative

  void validate() const {
    if (binEdges.size() < 2 || masses.size() + 1 != binEdges.size())
      throw PreconditionError("measure: edge/mass size mismatch");
    for (std::size_t i = 0; i + 1 < binEdges.size(); ++i)
      if (!(binEdges[i] < binEdges[i + 1]))
        throw PreconditionError("measure: edges must be strictly increasing");
    for (double m : masses)
      if (!(m >= 0.0)) throw PreconditionError("measure: negative mass");
  }

  double totalMass() const {
    double t = 0.0;
    for (double m : masses) t += m;
    return t;
  }
};

inline DOSMeasure measureFromCurve(const IDSCurve& curve) {
  if (curve.grid.size() < 2) throw PreconditionError("measureFromCurve: need at least two grid points");
  DOSMeasure m;
  m.binEdges = curve.grid;
  m.masses.reserve(curve.grid.size() - 1);
  for (std::size_t i = 0; i + 1 < curve.values.size(); ++i)
    m.masses.push_back(std::max(0.0, curve.values[i + 1] - curve.values[i]));
  m.validate();
  return m;
}

// Band edges of the averaged model: eigenvalues of v0 raised by the
// eigen-projected mean jump strength (one jump per unit length).
inline Vec meanFieldEdges(const ModelConfig& cfg, const DistributionSpec& spec) {
  Eigen::SelfAdjointEigenSolver<Mat> es(cfg.v0);
  const Vec mu = spec.means();
  Mat qbar = Mat::Zero(cfg.n, cfg.n);
  for (int i = 0; i < cfg.n; ++i) qbar(i, i) = cfg.couplings[i] * mu[i];
  const Mat w = es.eigenvectors().transpose() * qbar * es.eigenvectors();
  return es.eigenvalues() + w.diagonal();
}

// Extends a measured window with log-spaced bins carrying the averaged-model
// approximation n(E) ~ (1/pi) sum_i sqrt((E - edge_i)^+) out to eCut.  The
// kernel decays like E'^(-3/2) against this density, so the remainder beyond
// eCut only moves the E-independent part of the integral.
inline DOSMeasure extendMeasureTail(DOSMeasure m, const ModelConfig& cfg,
                                    const DistributionSpec& spec, double eCut = 1e8,
                                    int bins = 600) {
  m.validate();
  const double lo = m.binEdges.back();
  if (!(lo > 0.0)) throw PreconditionError("extendMeasureTail: window must end above zero");
  if (!(eCut > lo)) throw PreconditionError("extendMeasureTail: cutoff below window");
  if (bins < 1) throw PreconditionError("extendMeasureTail: need at least one bin");
  const Vec edges = meanFieldEdges(cfg, spec);
  const auto freeIds = [&](double e) {
    double s = 0.0;
    for (int i = 0; i < edges.size(); ++i)
      if (e > edges[i]) s += std::sqrt(e - edges[i]);
    return s / kPi;
  };
  const double ratio = std::pow(eCut / lo, 1.0 / bins);
  double prevEdge = lo;
  double prevIds = freeIds(lo);
  for (int k = 1; k <= bins; ++k) {
    const double edge = k == bins ? eCut : lo * std::pow(ratio, k);
    const double ids = freeIds(edge);
    m.binEdges.push_back(edge);
    m.masses.push_back(std::max(0.0, ids - prevIds));
    prevEdge = edge;
    prevIds = ids;
  }
  (void)prevEdge;
  m.validate();
  return m;
}

// Integral of log |(E' - E) / (E' - i)| against the measure.  Far bins use
// the midpoint rule; the bin containing E (and any bin whose midpoint falls
// within a bin-width of E) spreads its mass uniformly and integrates the log
// factor in closed form, since the singularity is integrable.
inline double logKernelIntegral(const DOSMeasure& m, double e) {
  m.validate();
  const auto logPrim = [](double x) {  // antiderivative of log|t|, value 0 at 0
    return x == 0.0 ? 0.0 : x * std::log(std::abs(x)) - x;
  };
  double out = 0.0;
  for (std::size_t i = 0; i < m.masses.size(); ++i) {
    const double mass = m.masses[i];
    if (mass == 0.0) continue;
    const double lo = m.binEdges[i], hi = m.binEdges[i + 1];
    if (e == lo || e == hi)
      throw PreconditionError("logKernelIntegral: energy sits on a massive bin edge");
    const double mid = 0.5 * (lo + hi);
    const double width = hi - lo;
    double logPart;
    if ((e > lo && e < hi) || std::abs(mid - e) <= std::max(width, 1e-8))
      logPart = (logPrim(hi - e) - logPrim(lo - e)) / width;
    else
      logPart = std::log(std::abs(mid - e));
    out += mass * (logPart - 0.5 * std::log(mid * mid + 1.0));
  }
  return out;
}

struct ThoulessFit {
  double alphaHat = 0.0;
  std::vector<double> gridUsed;
  std::vector<double> sums;       // measured exponent sums s(E)
  std::vector<double> integrals;  // kernel integrals at the same energies
  std::vector<double> residuals;  // s(E) + alphaHat - integral(E)
};

// Least-squares fit of the single offset in
//   sum of positive exponents (E) = -alpha + integral(E):
// alphaHat is the mean of integral - sum, residuals are reported per energy.
inline ThoulessFit fitThouless(const std::vector<LyapunovSpectrum>& spectra,
                               const DOSMeasure& measure) {
  if (spectra.size() < 3) throw PreconditionError("fitThouless: need at least 3 energies");
  ThoulessFit fit;
  for (const auto& sp : spectra) {
    const auto dim = sp.exponents.size();
    if (dim == 0 || dim % 2 != 0)
      throw PreconditionError("fitThouless: spectrum must hold 2n exponents");
    double s = 0.0;
    for (std::size_t p = 0; p < dim / 2; ++p) s += sp.exponents[p];
    fit.gridUsed.push_back(sp.energy);
    fit.sums.push_back(s);
    fit.integrals.push_back(logKernelIntegral(measure, sp.energy));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < fit.sums.size(); ++i) acc += fit.integrals[i] - fit.sums[i];
  fit.alphaHat = acc / static_cast<double>(fit.sums.size());
  for (std::size_t i = 0; i < fit.sums.size(); ++i)
    fit.residuals.push_back(fit.sums[i] + fit.alphaHat - fit.integrals[i]);
  return fit;
}

// Propagated tolerance for a residual at energy E: three standard errors on
// the measured exponent sum, plus the sampled total variation of the kernel
// over the measured window times a 3/(2L) allowance on the counting curve.
// Edges within half a local bin width of E clamp there, keeping the sampled
// variation finite across the integrable singularity.
inline double thoulessBudget(const LyapunovSpectrum& spectrum, const DOSMeasure& measured,
                             double e, int halfLength) {
  measured.validate();
  if (halfLength < 1) throw PreconditionError("thoulessBudget: halfLength must be >= 1");
  double se = 0.0;
  for (std::size_t p = 0; p < spectrum.exponents.size() / 2; ++p) se += spectrum.stderrs[p];
  double minWidth = 1e300;
  for (std::size_t i = 0; i + 1 < measured.binEdges.size(); ++i)
    minWidth = std::min(minWidth, measured.binEdges[i + 1] - measured.binEdges[i]);
  const double clamp = 0.5 * minWidth;
  const auto kernel = [&](double x) {
    const double d = std::max(std::abs(x - e), clamp);
    return std::log(d) - 0.5 * std::log(x * x + 1.0);
  };
  double tv = 0.0;
  for (std::size_t i = 0; i + 1 < measured.binEdges.size(); ++i)
    tv += std::abs(kernel(measured.binEdges[i + 1]) - kernel(measured.binEdges[i]));
  return 3.0 * se + tv * 3.0 / (2.0 * halfLength);
}

struct IdsHolderFit {
  double alphaHat = 0.0;
  double c = 0.0;
  double rSquared = 0.0;
  bool inconclusive = false;
  std::string note;
};

// Continuity-exponent probe on a counting curve: all pairs inside the window
// feed a log-log regression of |value difference| against |energy distance|.
// Differences at the curve's counting resolution sit below the noise floor
// and are excluded; losing too many flags the fit inconclusive.
inline IdsHolderFit idsHolderFit(const IDSCurve& curve, double lo, double hi) {
  if (!(lo < hi)) throw PreconditionError("idsHolderFit: empty window");
  std::vector<double> dist, diff;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < curve.grid.size(); ++i)
    if (curve.grid[i] >= lo && curve.grid[i] <= hi) idx.push_back(i);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      dist.push_back(curve.grid[idx[b]] - curve.grid[idx[a]]);
      diff.push_back(std::abs(curve.values[idx[b]] - curve.values[idx[a]]));
    }
  const double floor = 1.5 / (2.0 * std::max(1, curve.halfLength));
  const HolderFit base = holderExponentFit(dist, diff, floor);
  IdsHolderFit fit;
  fit.alphaHat = base.exponent;
  fit.c = std::exp(base.intercept);
  fit.rSquared = base.rSquared;
  fit.inconclusive = base.inconclusive;
  fit.note = base.note;
  return fit;
}

}  // namespace kplab
