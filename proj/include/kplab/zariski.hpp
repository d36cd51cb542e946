#pragma once
// Density certificate for the group generated by the cell transfer matrices:
// builds jump generators conjugated through powers of the free cell in the
// diagonalizing basis, evaluates the two determinants that witness linear
// independence, and computes the bracket-closure dimension inside sp3(R).
//
// Channel weights here follow the alpha/beta/gamma convention of
// classifyRegime (radicands E-1, E-sqrt2, E+sqrt2).  All trigonometric
// entries are evaluated through the entire functions cosSqrt/sincSqrt, so a
// single code path covers every regime; classified boundary energies are
// refused by contract.

#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "core.hpp"
#include "hash.hpp"
#include "transfer.hpp"

namespace kplab {

struct LieElement {
  Mat mat;  // 6x6, blocks [[a, b1], [b2, -tA]] with b1, b2 symmetric
};

// Membership defect for sp3(R): symmetry of the off-diagonal blocks plus the
// lower-right block matching -tA.
inline double algebraDefect(const Mat& m) {
  if (m.rows() != 6 || m.cols() != 6) throw PreconditionError("algebraDefect: need 6x6");
  const Mat a = m.topLeftCorner(3, 3);
  const Mat b1 = m.topRightCorner(3, 3);
  const Mat b2 = m.bottomLeftCorner(3, 3);
  const Mat d = m.bottomRightCorner(3, 3);
  double defect = (b1 - b1.transpose()).norm() + (b2 - b2.transpose()).norm() +
                  (d + a.transpose()).norm();
  return defect;
}

inline bool inSymplecticAlgebra(const Mat& m, double tol = 1e-10) {
  return algebraDefect(m) <= tol * (1.0 + m.norm());
}

namespace detail {

inline std::array<double, 3> certWeights(double e) {
  if (classifyRegime(e).regime == Regime::Boundary)
    throw PreconditionError("density certificate: boundary energy refused");
  return {e - 1.0, e - kSqrt2, e + kSqrt2};
}

// l-th power of the free-cell channel propagator at weights w, all regimes:
// cos(l sqrt(w)) = cosSqrt(l^2 w), sin(l sqrt(w))/sqrt(w) = l sincSqrt(l^2 w).
inline Mat rotorPower(const std::array<double, 3>& w, int l) {
  Mat r = Mat::Zero(6, 6);
  const double lf = static_cast<double>(l);
  for (int i = 0; i < 3; ++i) {
    const double arg = lf * lf * w[i];
    const double c = cosSqrt(arg);
    const double s = lf * sincSqrt(arg);
    r(i, i) = c;
    r(i, 3 + i) = s;
    r(3 + i, i) = -w[i] * s;
    r(3 + i, 3 + i) = c;
  }
  return r;
}

// Images of the two jump directions in the eigenbasis of the layer coupling.
// diag(sqrt2, 0, -sqrt2) maps to the checkerboard below; diag(2, 0, 2) to the
// block form next to it.
inline Mat jumpImage1() {
  Mat w(3, 3);
  w << 0, -1, -1,
       -1, 0, 0,
       -1, 0, 0;
  return w;
}

inline Mat jumpImage2() {
  Mat w(3, 3);
  w << 2, 0, 0,
       0, 1, 1,
       0, 1, 1;
  return w;
}

inline Mat lowerLeftEmbed(const Mat& w) {
  Mat x = Mat::Zero(6, 6);
  x.bottomLeftCorner(3, 3) = w;
  return x;
}

}  // namespace detail

// First generator family: conjugates the embedded first jump image through
// l cells.
inline Mat buildD1(double e, int l) {
  const auto w = detail::certWeights(e);
  return detail::rotorPower(w, l) * detail::lowerLeftEmbed(detail::jumpImage1()) *
         detail::rotorPower(w, -l);
}

// Second generator family, same conjugation with the second jump image.
inline Mat buildD2(double e, int l) {
  const auto w = detail::certWeights(e);
  return detail::rotorPower(w, l) * detail::lowerLeftEmbed(detail::jumpImage2()) *
         detail::rotorPower(w, -l);
}

// The first family spans the 8-parameter pattern space
//   [[0,a,b, 0,g,h], [c,0,0, g,0,0], [d,0,0, h,0,0],
//    [0,e,f, 0,-c,-d], [e,0,0, -a,0,0], [f,0,0, -b,0,0]];
// these two sparse elements of it (a=1 resp. b=1) seed the bracket step.
inline Mat patternSeedA() {
  Mat m = Mat::Zero(6, 6);
  m(0, 1) = 1.0;
  m(4, 3) = -1.0;
  return m;
}

inline Mat patternSeedB() {
  Mat m = Mat::Zero(6, 6);
  m(0, 2) = 1.0;
  m(5, 3) = -1.0;
  return m;
}

// Commutators of the pattern seeds with the l=0 first generator.  Both are
// constant in E (the l=0 generator is), concentrated in the lower-left block.
inline std::pair<Mat, Mat> buildBrackets(double e) {
  const Mat d10 = buildD1(e, 0);
  const Mat b0 = patternSeedA() * d10 - d10 * patternSeedA();
  const Mat b1 = patternSeedB() * d10 - d10 * patternSeedB();
  return {b0, b1};
}

// Coordinate functionals of the first family: the 8 independent entry slots
// in the order (3,1),(3,2),(1,3),(2,3),(0,1),(0,2),(1,0),(2,0).
inline Eigen::Matrix<double, 8, 1> coordsFamily1(const Mat& d1) {
  Eigen::Matrix<double, 8, 1> v;
  v << d1(3, 1), d1(3, 2), d1(1, 3), d1(2, 3), d1(0, 1), d1(0, 2), d1(1, 0), d1(2, 0);
  return v;
}

// Determinant of the 8 coordinate vectors of the first family at l = 0..7.
inline double det88(double e) {
  Eigen::Matrix<double, 8, 8> m;
  for (int l = 0; l < 8; ++l) m.col(l) = coordsFamily1(buildD1(e, l));
  return m.determinant();
}

// Closed form of the same determinant.  With x, y, z the cell multipliers
// cos of the three channel weights, the polynomial core factors as
// 4096 (y-z)^4 (x^2-y^2)(x^2-z^2) G^2 with
// G = -4x^2(1-x^2) + y^2 + z^2 + 2yz(1-2x^2); the sinc prefactor carries the
// 1/(alpha^4 beta^2 gamma^2) normalization of the coordinate functionals.
inline double det88Closed(double e) {
  const auto w = detail::certWeights(e);
  const double x = cosSqrt(w[0]), y = cosSqrt(w[1]), z = cosSqrt(w[2]);
  const double s1 = sincSqrt(w[0]), s2 = sincSqrt(w[1]), s3 = sincSqrt(w[2]);
  const double g = -4.0 * x * x * (1.0 - x * x) + y * y + z * z +
                   2.0 * y * z * (1.0 - 2.0 * x * x);
  const double pre = s1 * s1 * s1 * s1 * s2 * s2 * s3 * s3;
  const double ymz = y - z;
  return 4096.0 * pre * ymz * ymz * ymz * ymz * (x * x - y * y) * (x * x - z * z) * g * g;
}

// The 13 entry slots occupied by the second family and the two brackets,
// canonically ordered by (blockRow, blockCol, row, col) of the smallest
// representative; symmetric partners carry the same coordinate.
inline const std::array<std::pair<int, int>, 13>& familySlots2() {
  static const std::array<std::pair<int, int>, 13> slots = {{{0, 0},
                                                             {1, 1},
                                                             {1, 2},
                                                             {2, 1},
                                                             {2, 2},
                                                             {0, 3},
                                                             {1, 4},
                                                             {1, 5},
                                                             {2, 5},
                                                             {3, 0},
                                                             {4, 1},
                                                             {4, 2},
                                                             {5, 2}}};
  return slots;
}

inline Eigen::Matrix<double, 13, 1> coordsFamily2(const Mat& m) {
  Eigen::Matrix<double, 13, 1> v;
  const auto& slots = familySlots2();
  for (int i = 0; i < 13; ++i) v[i] = m(slots[i].first, slots[i].second);
  return v;
}

// Determinant of the 13 coordinate vectors: second family at l = 0..10 plus
// the two brackets.  Sign is fixed by the canonical slot ordering; at
// E = 1.6 the value is negative.
inline double det1313(double e) {
  Eigen::Matrix<double, 13, 13> m;
  for (int l = 0; l <= 10; ++l) m.col(l) = coordsFamily2(buildD2(e, l));
  const auto [b0, b1] = buildBrackets(e);
  m.col(11) = coordsFamily2(b0);
  m.col(12) = coordsFamily2(b1);
  return m.determinant();
}

struct ClosureReport {
  int dim = 0;
  double smallestAccepted = std::numeric_limits<double>::infinity();
  double largestRejected = 0.0;
  bool ambiguous = false;  // residual landed within a decade of the threshold
};

namespace detail {

struct SpanBuilder {
  double tol;
  std::vector<Mat> basis;        // original directions, unit Frobenius norm
  std::vector<Vec> orthobasis;   // orthonormalized vectorizations
  ClosureReport report;

  explicit SpanBuilder(double t) : tol(t) {}

  static Vec vectorize(const Mat& m) {
    Vec v(m.size());
    int k = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) v[k++] = m(r, c);
    return v;
  }

  bool add(const Mat& candidate) {
    const double scale = candidate.norm();
    if (!(scale > 1e-300)) return false;
    const Mat unit = candidate / scale;
    Vec r = vectorize(unit);
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& b : orthobasis) r -= b.dot(r) * b;
    const double residual = r.norm();
    if (residual > 0.1 * tol && residual < 10.0 * tol) report.ambiguous = true;
    if (residual > tol) {
      report.smallestAccepted = std::min(report.smallestAccepted, residual);
      orthobasis.push_back(r / residual);
      basis.push_back(unit);
      report.dim = static_cast<int>(basis.size());
      return true;
    }
    report.largestRejected = std::max(report.largestRejected, residual);
    return false;
  }
};

}  // namespace detail

// Dimension of the linear span alone.
inline int spanDimension(const std::vector<Mat>& generators, double tol = 1e-8) {
  detail::SpanBuilder sb(tol);
  for (const Mat& g : generators) sb.add(g);
  return sb.report.dim;
}

// Dimension of the Lie closure: alternately adjoins commutators of the
// current span until it stabilizes.  For 6x6 generators inside sp3(R) the
// result is capped by the ambient dimension 21.
inline int lieClosureDim(const std::vector<Mat>& generators, double tol = 1e-8,
                         ClosureReport* reportOut = nullptr) {
  detail::SpanBuilder sb(tol);
  std::vector<Mat> frontier;
  for (const Mat& g : generators)
    if (sb.add(g)) frontier.push_back(sb.basis.back());
  while (!frontier.empty()) {
    std::vector<Mat> fresh;
    const std::vector<Mat> stable = sb.basis;  // snapshot; brackets run against it
    for (const Mat& f : frontier)
      for (const Mat& b : stable) {
        const Mat c = f * b - b * f;
        // A commuting pair leaves pure rounding residue; normalizing that
        // would launder noise into a fresh direction.
        if (c.norm() <= 1e-12 * f.norm() * b.norm()) continue;
        if (sb.add(c)) fresh.push_back(sb.basis.back());
      }
    frontier = std::move(fresh);
  }
  if (reportOut) *reportOut = sb.report;
  return sb.report.dim;
}

enum class DetKind { Det88, Det1313 };

enum class Verdict { Pass, Undecided };

struct Certificate {
  double energy = 0;
  double det88Value = 0;
  double det1313Value = 0;
  int closureDim = 0;
  Verdict verdict = Verdict::Undecided;
  ClosureReport closure;
  std::array<std::string, 4> witnessSha;  // family1, family2, bracket0, bracket1
};

namespace detail {

// Numerical-zero threshold for a determinant: a slice of its Hadamard bound.
inline double detZeroTol(const Mat& m) {
  double bound = 1.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) bound *= m.row(r).norm();
  return 1e-9 * std::max(bound, 1e-12);
}

}  // namespace detail

// Runs the determinant chain at one energy: nonzero det88 certifies the
// 8-dim family, the brackets then complete the 13-slot family, nonzero
// det1313 certifies it, and the closure dimension must reach 21.  Any zero
// yields Undecided (candidate critical energy).
inline Certificate certifyZariskiDense(double e, double tol = 1e-8) {
  Certificate cert;
  cert.energy = e;

  Eigen::Matrix<double, 8, 8> m8;
  std::vector<Mat> family1;
  for (int l = 0; l < 8; ++l) {
    family1.push_back(buildD1(e, l));
    m8.col(l) = coordsFamily1(family1.back());
  }
  cert.det88Value = m8.determinant();

  std::vector<Mat> family2;
  for (int l = 0; l <= 10; ++l) family2.push_back(buildD2(e, l));
  const auto [b0, b1] = buildBrackets(e);
  Eigen::Matrix<double, 13, 13> m13;
  for (int l = 0; l <= 10; ++l) m13.col(l) = coordsFamily2(family2[l]);
  m13.col(11) = coordsFamily2(b0);
  m13.col(12) = coordsFamily2(b1);
  cert.det1313Value = m13.determinant();

  std::string fam1Bytes, fam2Bytes;
  for (const auto& g : family1) fam1Bytes += serializeMatrix(g);
  for (const auto& g : family2) fam2Bytes += serializeMatrix(g);
  cert.witnessSha = {sha256Hex(fam1Bytes), sha256Hex(fam2Bytes),
                     sha256Hex(serializeMatrix(b0)), sha256Hex(serializeMatrix(b1))};

  if (std::abs(cert.det88Value) <= detail::detZeroTol(Mat(m8)) ||
      std::abs(cert.det1313Value) <= detail::detZeroTol(Mat(m13)))
    return cert;  // Undecided

  std::vector<Mat> generators = family1;
  generators.insert(generators.end(), family2.begin(), family2.end());
  generators.push_back(b0);
  generators.push_back(b1);
  cert.closureDim = lieClosureDim(generators, tol, &cert.closure);
  cert.verdict = cert.closureDim == 21 ? Verdict::Pass : Verdict::Undecided;
  return cert;
}

struct CriticalSet {
  double lo = 0, hi = 0;
  DetKind kind = DetKind::Det88;
  std::vector<double> zeros;
};

// Zero scan for the tracked determinant on [lo, hi].  Sign changes are
// bisected; dips of |det| without a sign change (the determinants carry
// squared factors, so even-order zeros are generic) are refined by ternary
// search and kept when the minimum sits at the numerical-zero floor.  The
// interval is split at classified boundary points; roots are refined to
// 1e-10 in energy and deduplicated.
inline CriticalSet scanCriticalSet(double lo, double hi, double step, DetKind kind) {
  if (!(step > 0)) throw PreconditionError("scanCriticalSet: step must be positive");
  CriticalSet out;
  out.lo = lo;
  out.hi = hi;
  out.kind = kind;
  if (!(lo < hi)) return out;

  const auto eval = [&](double e) {
    return kind == DetKind::Det88 ? det88(e) : det1313(e);
  };

  // Segment ends at boundary points, nudged off by a hair on each side.
  std::vector<std::pair<double, double>> segments;
  std::vector<double> cuts;
  for (double b : {-kSqrt2, 1.0, kSqrt2})
    if (b > lo + 1e-9 && b < hi - 1e-9) cuts.push_back(b);
  double segLo = lo;
  const double nudge = 1e-9;
  for (double c : cuts) {
    segments.push_back({segLo, c - nudge});
    segLo = c + nudge;
  }
  segments.push_back({segLo, hi});

  const double refineTol = 1e-10;
  for (auto [a, b] : segments) {
    if (!(a < b)) continue;
    std::vector<double> es, vs;
    for (double e = a;; e += step) {
      if (e > b) e = b;
      es.push_back(e);
      vs.push_back(eval(e));
      if (e >= b) break;
    }
    double med;
    {
      std::vector<double> mags;
      mags.reserve(vs.size());
      for (double v : vs) mags.push_back(std::abs(v));
      std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
      med = std::max(mags[mags.size() / 2], 1e-300);
    }

    for (std::size_t i = 0; i + 1 < es.size(); ++i) {
      if (vs[i] * vs[i + 1] < 0.0) {
        double x0 = es[i], x1 = es[i + 1], f0 = vs[i];
        while (x1 - x0 > refineTol) {
          const double mid = 0.5 * (x0 + x1);
          const double fm = eval(mid);
          if (fm == 0.0) {
            x0 = x1 = mid;
            break;
          }
          if (f0 * fm < 0.0)
            x1 = mid;
          else {
            x0 = mid;
            f0 = fm;
          }
        }
        out.zeros.push_back(0.5 * (x0 + x1));
      } else if (vs[i + 1] == 0.0 && i + 2 == es.size()) {
        out.zeros.push_back(es[i + 1]);
      }
    }

    // |det| valleys well below the segment's median magnitude: candidate
    // even-order zeros.  The gate only proposes; the refined minimum decides,
    // so it can be generous (a quartic dip sampled at step h bottoms out near
    // C h^2, far above any fixed near-zero threshold).
    for (std::size_t i = 1; i + 1 < es.size(); ++i) {
      const double m = std::abs(vs[i]);
      if (m == 0.0) {
        out.zeros.push_back(es[i]);
        continue;
      }
      if (m >= std::abs(vs[i - 1]) || m > std::abs(vs[i + 1]) || m > 1e-2 * med) continue;
      double x0 = es[i - 1], x1 = es[i + 1];
      while (x1 - x0 > refineTol) {
        const double t0 = x0 + (x1 - x0) / 3.0;
        const double t1 = x1 - (x1 - x0) / 3.0;
        if (std::abs(eval(t0)) < std::abs(eval(t1)))
          x1 = t1;
        else
          x0 = t0;
      }
      const double zm = 0.5 * (x0 + x1);
      if (std::abs(eval(zm)) <= 1e-8 * med) out.zeros.push_back(zm);
    }
  }
  std::sort(out.zeros.begin(), out.zeros.end());
  const double sep = 100.0 * refineTol;
  std::vector<double> dedup;
  for (double z : out.zeros)
    if (dedup.empty() || z - dedup.back() > sep) dedup.push_back(z);
  out.zeros = std::move(dedup);
  return out;
}

}  // namespace kplab
