#pragma once
// Dense-matrix substrate: symplectic-form checks, scaling-and-squaring matrix
// exponential, exterior powers.  Everything here is a pure function over
// Eigen dense types and safe for unsynchronized concurrent use.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kplab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error taxonomy, mapped onto process exit codes by the batch front end:
// config 2, numerical breakdown 3, precondition violation 4.
inline constexpr const char* kVersion = "1.0.0";

struct Error : std::runtime_error {
  int exitCode;
  Error(std::string msg, int code) : std::runtime_error(std::move(msg)), exitCode(code) {}
};
struct ConfigError : Error {
  explicit ConfigError(std::string msg) : Error(std::move(msg), 2) {}
};
struct BreakdownError : Error {
  explicit BreakdownError(std::string msg) : Error(std::move(msg), 3) {}
};
struct PreconditionError : Error {
  explicit PreconditionError(std::string msg) : Error(std::move(msg), 4) {}
};

// J = [[0, -I], [I, 0]], the bilinear form preserved by the transfer matrices.
inline Mat symplecticForm(int halfDim) {
  Mat j = Mat::Zero(2 * halfDim, 2 * halfDim);
  j.topRightCorner(halfDim, halfDim) = -Mat::Identity(halfDim, halfDim);
  j.bottomLeftCorner(halfDim, halfDim) = Mat::Identity(halfDim, halfDim);
  return j;
}

// Frobenius norm of tM J M - J; zero iff M is exactly symplectic.
inline double symplecticDefect(const Mat& m) {
  if (m.rows() != m.cols()) throw PreconditionError("symplecticDefect: matrix not square");
  if (m.rows() % 2 != 0) throw PreconditionError("symplecticDefect: odd dimension");
  const Mat j = symplecticForm(static_cast<int>(m.rows()) / 2);
  return (m.transpose() * j * m - j).norm();
}

struct SymplecticMatrix {
  int halfDim;
  Mat mat;
};

// Wraps a matrix after checking the symplectic defect against the scaled
// roundoff budget 1e-9 * (1 + |M|_F^2).
inline SymplecticMatrix checkedSymplectic(Mat m) {
  const double defect = symplecticDefect(m);
  const double budget = 1e-9 * (1.0 + m.squaredNorm());
  if (!(defect <= budget))
    throw BreakdownError("symplectic defect " + std::to_string(defect) +
                         " exceeds budget " + std::to_string(budget));
  return SymplecticMatrix{static_cast<int>(m.rows()) / 2, std::move(m)};
}

namespace detail {

// Pade(13,13) numerator coefficients for exp.
inline constexpr double pade13[] = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};

}  // namespace detail

// Matrix exponential by scaling-and-squaring with a Pade(13,13) kernel.
// Backward error is bounded near machine precision for the 1-norms that
// arise here; tol only guards against degenerate inputs.
inline Mat matExp(const Mat& m, double tol = 1e-13) {
  if (m.rows() != m.cols()) throw PreconditionError("matExp: matrix not square");
  if (!m.allFinite()) throw PreconditionError("matExp: non-finite entries");
  (void)tol;
  const auto n = m.rows();
  const double theta13 = 5.371920351148152;  // backward-error cutoff for Pade(13,13)
  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  }
  const Mat a = m / std::pow(2.0, squarings);
  const Mat a2 = a * a;
  const Mat a4 = a2 * a2;
  const Mat a6 = a2 * a4;
  const auto& b = detail::pade13;
  const Mat id = Mat::Identity(n, n);
  const Mat u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) +
                     b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  const Mat v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
                b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

// Strictly increasing p-subsets of {0,..,n-1} in lexicographic order; this
// fixes the row/column basis of every exterior power in the artifact.
inline std::vector<std::vector<int>> indexSubsets(int n, int p) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(p);
  for (int i = 0; i < p; ++i) cur[i] = i;
  if (p == 0 || p > n) return out;
  while (true) {
    out.push_back(cur);
    int i = p - 1;
    while (i >= 0 && cur[i] == n - p + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int k = i + 1; k < p; ++k) cur[k] = cur[k - 1] + 1;
  }
  return out;
}

struct ExteriorPower {
  int sourceDim;
  int degree;
  Mat mat;
};

namespace detail {

inline double minorDet(const Mat& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  const int p = static_cast<int>(rows.size());
  switch (p) {
    case 1:
      return m(rows[0], cols[0]);
    case 2:
      return m(rows[0], cols[0]) * m(rows[1], cols[1]) -
             m(rows[0], cols[1]) * m(rows[1], cols[0]);
    case 3: {
      const double a = m(rows[0], cols[0]), b = m(rows[0], cols[1]), c = m(rows[0], cols[2]);
      const double d = m(rows[1], cols[0]), e = m(rows[1], cols[1]), f = m(rows[1], cols[2]);
      const double g = m(rows[2], cols[0]), h = m(rows[2], cols[1]), i = m(rows[2], cols[2]);
      return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    }
    default: {
      Mat sub(p, p);
      for (int r = 0; r < p; ++r)
        for (int cc = 0; cc < p; ++cc) sub(r, cc) = m(rows[r], cols[cc]);
      return sub.partialPivLu().determinant();
    }
  }
}

}  // namespace detail

// p-th exterior power: entry (S,T) is the p x p minor with rows S, cols T.
// Multiplicative: extp(AB) = extp(A) extp(B).
inline ExteriorPower exteriorPower(const Mat& m, int p) {
  if (m.rows() != m.cols()) throw PreconditionError("exteriorPower: matrix not square");
  const int dim = static_cast<int>(m.rows());
  if (dim % 2 != 0) throw PreconditionError("exteriorPower: odd dimension");
  if (p < 1 || p > dim / 2) throw PreconditionError("exteriorPower: degree out of range");
  const auto subsets = indexSubsets(dim, p);
  const int d = static_cast<int>(subsets.size());
  Mat out(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) out(r, c) = detail::minorDet(m, subsets[r], subsets[c]);
  return ExteriorPower{dim, p, std::move(out)};
}

// cos(sqrt(w)) continued through w <= 0 as cosh(sqrt(-w)); entire in w.
inline double cosSqrt(double w) {
  return w >= 0.0 ? std::cos(std::sqrt(w)) : std::cosh(std::sqrt(-w));
}

// sin(sqrt(w))/sqrt(w) with the same continuation and value 1 at w = 0;
// the series branch keeps full precision through the removable point.
inline double sincSqrt(double w) {
  if (std::abs(w) < 1e-8)
    return 1.0 - w / 6.0 + w * w / 120.0 - w * w * w / 5040.0;
  const double a = std::sqrt(std::abs(w));
  return w > 0.0 ? std::sin(a) / a : std::sinh(a) / a;
}

}  // namespace kplab
