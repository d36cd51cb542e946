#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "kplab/core.hpp"
#include "kplab/sampling.hpp"
#include "kplab/transfer.hpp"

namespace kplab {

// FrameQR tracks an orthonormal frame and reads growth off the R diagonal;
// ExteriorPower tracks norm growth of the compound matrices of degree
// 1..n and recovers individual exponents as consecutive differences, with
// the negative half filled in by the symplectic symmetry of the spectrum.
enum class LyapunovScheme { FrameQR, ExteriorPower };

struct LyapunovOptions {
  long long steps = 1'000'000;
  int renormEvery = 10;
  int batches = 20;
  LyapunovScheme scheme = LyapunovScheme::FrameQR;
  // Fold the accumulated block early once any entry of the running product
  // exceeds this magnitude.
  double overflowGuard = 1e8;
};

struct LyapunovSpectrum {
  double energy = 0.0;
  long long steps = 0;
  // Size 2n, ordered from largest to smallest.  stderrs are batch-means
  // standard errors of the matching exponent.
  std::vector<double> exponents;
  std::vector<double> stderrs;
};

namespace detail {

inline void validateLyapunovOptions(const LyapunovOptions& opts) {
  if (opts.steps < 1) throw PreconditionError("lyapunov: steps must be >= 1");
  if (opts.renormEvery < 1) throw PreconditionError("lyapunov: renormEvery must be >= 1");
  if (opts.batches < 2) throw PreconditionError("lyapunov: batches must be >= 2");
  if (opts.steps < static_cast<long long>(opts.batches))
    throw PreconditionError("lyapunov: steps must be >= batches");
  if (!(opts.overflowGuard > 1.0))
    throw PreconditionError("lyapunov: overflowGuard must exceed 1");
}

// Batch boundaries: contiguous, sizes within one of each other.
inline std::vector<long long> batchSizes(long long steps, int batches) {
  std::vector<long long> sizes(batches, steps / batches);
  for (long long r = steps % batches, i = 0; i < r; ++i) ++sizes[static_cast<std::size_t>(i)];
  return sizes;
}

inline double batchMeanStderr(const std::vector<double>& means) {
  const auto b = static_cast<double>(means.size());
  double mu = 0.0;
  for (double m : means) mu += m;
  mu /= b;
  double var = 0.0;
  for (double m : means) var += (m - mu) * (m - mu);
  var /= (b - 1.0);
  return std::sqrt(var / b);
}

}  // namespace detail

// Runs the transfer cocycle for opts.steps cells at the given energy, drawing
// one coupling vector per cell from the stream.  Returns all 2n exponents
// with batch-means standard errors.  Renormalization happens every
// opts.renormEvery steps, at batch ends, and early when the block product
// grows past the overflow guard; a frame that loses rank raises
// BreakdownError.
inline LyapunovSpectrum estimateSpectrum(const ModelConfig& cfg, double energy,
                                         const DistributionSpec& spec, SampleStream stream,
                                         const LyapunovOptions& opts = {}) {
  detail::validateLyapunovOptions(opts);
  spec.validate();
  if (spec.n != cfg.n)
    throw PreconditionError("lyapunov: distribution channel count differs from model size");

  const int n = cfg.n;
  const int dim = 2 * n;
  const Mat aFree = freeTransfer(cfg, energy);
  const auto sizes = detail::batchSizes(opts.steps, opts.batches);

  LyapunovSpectrum out;
  out.energy = energy;
  out.steps = opts.steps;
  out.exponents.assign(static_cast<std::size_t>(dim), 0.0);
  out.stderrs.assign(static_cast<std::size_t>(dim), 0.0);

  if (opts.scheme == LyapunovScheme::FrameQR) {
    Mat frame = Mat::Identity(dim, dim);
    std::vector<double> totalLog(static_cast<std::size_t>(dim), 0.0);
    std::vector<std::vector<double>> batchMeans(static_cast<std::size_t>(dim));

    for (int b = 0; b < opts.batches; ++b) {
      const long long batchSteps = sizes[static_cast<std::size_t>(b)];
      std::vector<double> batchLog(static_cast<std::size_t>(dim), 0.0);
      Mat block = Mat::Identity(dim, dim);
      long long inBlock = 0;
      for (long long s = 0; s < batchSteps; ++s) {
        const Vec omega = stream.next();
        block = cellTransferMat(cfg, aFree, omega) * block;
        ++inBlock;
        const bool doFold = inBlock >= opts.renormEvery || s + 1 == batchSteps ||
                            block.cwiseAbs().maxCoeff() > opts.overflowGuard;
        if (!doFold) continue;
        if (!block.allFinite()) throw BreakdownError("lyapunov: block product overflowed");
        Eigen::HouseholderQR<Mat> qr(block * frame);
        Mat q = qr.householderQ();
        Mat r = qr.matrixQR().template triangularView<Eigen::Upper>();
        for (int i = 0; i < dim; ++i) {
          const double d = r(i, i);
          if (std::abs(d) < 1e-300) throw BreakdownError("lyapunov: frame lost rank");
          if (d < 0.0) q.col(i) = -q.col(i);
          batchLog[static_cast<std::size_t>(i)] += std::log(std::abs(d));
        }
        frame = q;
        block = Mat::Identity(dim, dim);
        inBlock = 0;
      }
      for (int i = 0; i < dim; ++i) {
        totalLog[static_cast<std::size_t>(i)] += batchLog[static_cast<std::size_t>(i)];
        batchMeans[static_cast<std::size_t>(i)].push_back(
            batchLog[static_cast<std::size_t>(i)] / static_cast<double>(batchSteps));
      }
    }
    for (int i = 0; i < dim; ++i) {
      out.exponents[static_cast<std::size_t>(i)] =
          totalLog[static_cast<std::size_t>(i)] / static_cast<double>(opts.steps);
      out.stderrs[static_cast<std::size_t>(i)] =
          detail::batchMeanStderr(batchMeans[static_cast<std::size_t>(i)]);
    }
    return out;
  }

  // Exterior-power scheme: track compound products of degree 1..n; the
  // degree-p norm growth rate is the sum of the top p exponents.
  std::vector<Mat> compound(static_cast<std::size_t>(n));
  std::vector<double> totalLog(static_cast<std::size_t>(n), 0.0);
  std::vector<std::vector<double>> batchGapMeans(static_cast<std::size_t>(n));
  for (int p = 1; p <= n; ++p) {
    const auto d = static_cast<Eigen::Index>(indexSubsets(dim, p).size());
    compound[static_cast<std::size_t>(p - 1)] = Mat::Identity(d, d);
  }

  for (int b = 0; b < opts.batches; ++b) {
    const long long batchSteps = sizes[static_cast<std::size_t>(b)];
    std::vector<double> batchLog(static_cast<std::size_t>(n), 0.0);
    Mat block = Mat::Identity(dim, dim);
    long long inBlock = 0;
    for (long long s = 0; s < batchSteps; ++s) {
      const Vec omega = stream.next();
      block = cellTransferMat(cfg, aFree, omega) * block;
      ++inBlock;
      const bool doFold = inBlock >= opts.renormEvery || s + 1 == batchSteps ||
                          block.cwiseAbs().maxCoeff() > opts.overflowGuard;
      if (!doFold) continue;
      if (!block.allFinite()) throw BreakdownError("lyapunov: block product overflowed");
      for (int p = 1; p <= n; ++p) {
        Mat& acc = compound[static_cast<std::size_t>(p - 1)];
        acc = exteriorPower(block, p).mat * acc;
        const double nrm = acc.norm();
        if (!(nrm > 1e-300) || !std::isfinite(nrm))
          throw BreakdownError("lyapunov: compound product degenerated");
        batchLog[static_cast<std::size_t>(p - 1)] += std::log(nrm);
        acc /= nrm;
      }
      block = Mat::Identity(dim, dim);
      inBlock = 0;
    }
    for (int p = 1; p <= n; ++p) {
      totalLog[static_cast<std::size_t>(p - 1)] += batchLog[static_cast<std::size_t>(p - 1)];
      const double prev = p > 1 ? batchLog[static_cast<std::size_t>(p - 2)] : 0.0;
      batchGapMeans[static_cast<std::size_t>(p - 1)].push_back(
          (batchLog[static_cast<std::size_t>(p - 1)] - prev) / static_cast<double>(batchSteps));
    }
  }
  for (int p = 1; p <= n; ++p) {
    const double prev = p > 1 ? totalLog[static_cast<std::size_t>(p - 2)] : 0.0;
    const double gamma =
        (totalLog[static_cast<std::size_t>(p - 1)] - prev) / static_cast<double>(opts.steps);
    const double se = detail::batchMeanStderr(batchGapMeans[static_cast<std::size_t>(p - 1)]);
    out.exponents[static_cast<std::size_t>(p - 1)] = gamma;
    out.stderrs[static_cast<std::size_t>(p - 1)] = se;
    out.exponents[static_cast<std::size_t>(dim - p)] = -gamma;
    out.stderrs[static_cast<std::size_t>(dim - p)] = se;
  }
  return out;
}

inline LyapunovSpectrum estimateSpectrum(const ModelConfig& cfg, double energy,
                                         const DistributionSpec& spec, std::uint64_t seed,
                                         const LyapunovOptions& opts = {}) {
  return estimateSpectrum(cfg, energy, spec, SampleStream(spec, seed, 0), opts);
}

struct SpectrumScan {
  std::vector<double> energies;
  std::vector<LyapunovSpectrum> results;
};

// One spectrum per energy.  Each energy uses the substream whose id is its
// index in the grid, so results are identical for any worker count.
inline SpectrumScan scanSpectrum(const ModelConfig& cfg, const std::vector<double>& energies,
                                 const DistributionSpec& spec, std::uint64_t seed,
                                 const LyapunovOptions& opts = {}, int workers = 1) {
  if (workers < 1) throw PreconditionError("scanSpectrum: workers must be >= 1");
  SpectrumScan scan;
  scan.energies = energies;
  scan.results.resize(energies.size());
  const auto runOne = [&](std::size_t i) {
    scan.results[i] = estimateSpectrum(cfg, energies[i], spec,
                                       SampleStream(spec, seed, static_cast<std::uint64_t>(i)),
                                       opts);
  };
  const auto total = energies.size();
  const auto nThreads = std::min<std::size_t>(static_cast<std::size_t>(workers), total);
  if (nThreads <= 1) {
    for (std::size_t i = 0; i < total; ++i) runOne(i);
    return scan;
  }
  std::atomic<std::size_t> cursor{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nThreads);
  for (std::size_t t = 0; t < nThreads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = cursor.fetch_add(1); i < total; i = cursor.fetch_add(1)) runOne(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return scan;
}

struct HolderFit {
  double exponent = 0.0;
  double stderr_ = 0.0;
  double intercept = 0.0;
  double rSquared = 0.0;
  bool inconclusive = false;
  std::string note;
};

// Log-log regression of values against distances.  Pairs at or below the
// noise floor are dropped; the fit is flagged inconclusive when fewer than
// three pairs survive or the surviving distances span less than a decade.
inline HolderFit holderExponentFit(const std::vector<double>& distances,
                                   const std::vector<double>& values,
                                   double noiseFloor = 0.0) {
  if (distances.size() != values.size())
    throw PreconditionError("holderExponentFit: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!(distances[i] > 0.0)) continue;
    if (!(values[i] > noiseFloor)) continue;
    lx.push_back(std::log(distances[i]));
    ly.push_back(std::log(values[i]));
  }
  HolderFit fit;
  if (lx.size() < 3) {
    fit.inconclusive = true;
    fit.note = "fewer than three usable pairs above the noise floor";
    return fit;
  }
  const auto [mnIt, mxIt] = std::minmax_element(lx.begin(), lx.end());
  if (*mxIt - *mnIt < std::log(10.0)) {
    fit.inconclusive = true;
    fit.note = "distances span less than one decade";
    return fit;
  }
  const auto m = static_cast<double>(lx.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  double rss = 0.0, tss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.intercept + fit.exponent * lx[i]);
    rss += r * r;
    tss += (ly[i] - my) * (ly[i] - my);
  }
  fit.stderr_ = m > 2 ? std::sqrt(rss / (m - 2.0) / sxx) : 0.0;
  fit.rSquared = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  return fit;
}

}  // namespace kplab
