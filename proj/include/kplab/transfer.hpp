#pragma once
// One-cell transfer matrices of the point-interaction Hamiltonian: the free
// propagator over a unit cell and the derivative-jump factor at the cell end.
// Two construction paths are kept for the free part: an eigenbasis closed form
// (three decoupled oscillator channels) and the matrix exponential of the
// Hamiltonian block; they agree to ~1e-14 wherever both run.

#include <array>
#include <cmath>

#include "core.hpp"

namespace kplab {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kPi = 3.141592653589793;

struct ModelConfig {
  int n = 0;
  Vec couplings;  // interaction strength per channel
  Mat v0;         // symmetric tridiagonal coupling: 1 on off-diagonals

  static ModelConfig standard(int n, Vec couplings) {
    if (n < 1) throw ConfigError("model: layer count must be positive");
    if (couplings.size() != n) throw ConfigError("model: coupling count != layer count");
    if (!couplings.allFinite()) throw ConfigError("model: non-finite coupling");
    Mat v0 = Mat::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) v0(i, i + 1) = v0(i + 1, i) = 1.0;
    return ModelConfig{n, std::move(couplings), std::move(v0)};
  }
};

enum class Regime { High, MidHigh, MidLow, Low, Boundary };
enum class TrigKind { Circular, Hyperbolic };

// Channel frequencies in the convention used by the density certificate:
// alpha from E-1, beta from E-sqrt2, gamma from E+sqrt2, each |.|^(1/2) with
// a circular/hyperbolic flag recording the sign of the radicand.
struct RegimeParams {
  Regime regime;
  double alpha, beta, gamma;
  std::array<TrigKind, 3> trig;
};

// Interval classification with a 1e-12 guard band around {-sqrt2, 1, sqrt2}.
inline RegimeParams classifyRegime(double e) {
  if (!std::isfinite(e)) throw PreconditionError("classifyRegime: non-finite energy");
  const double guard = 1e-12;
  const auto near = [&](double b) { return std::abs(e - b) <= guard; };
  if (near(-kSqrt2) || near(1.0) || near(kSqrt2))
    return RegimeParams{Regime::Boundary, 0, 0, 0,
                        {TrigKind::Circular, TrigKind::Circular, TrigKind::Circular}};
  RegimeParams p{};
  p.alpha = std::sqrt(std::abs(e - 1.0));
  p.beta = std::sqrt(std::abs(e - kSqrt2));
  p.gamma = std::sqrt(std::abs(e + kSqrt2));
  const auto flag = [](double radicand) {
    return radicand > 0 ? TrigKind::Circular : TrigKind::Hyperbolic;
  };
  p.trig = {flag(e - 1.0), flag(e - kSqrt2), flag(e + kSqrt2)};
  if (e > kSqrt2)
    p.regime = Regime::High;
  else if (e > 1.0)
    p.regime = Regime::MidHigh;
  else if (e > -kSqrt2)
    p.regime = Regime::MidLow;
  else
    p.regime = Regime::Low;
  return p;
}

// Orthogonal diagonalizer of the three-layer coupling matrix; U^-1 = tU.
inline Mat buildU() {
  Mat u(3, 3);
  u << -kSqrt2, 1, 1,
       0, kSqrt2, -kSqrt2,
       kSqrt2, 1, 1;
  return 0.5 * u;
}

namespace detail {

// Per-channel cell propagator for -y'' = w y over unit length, assembled in
// position-major block layout: rows/cols 0..n-1 positions, n..2n-1 momenta.
inline Mat channelCell(const Vec& w) {
  const int n = static_cast<int>(w.size());
  Mat r = Mat::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    const double c = cosSqrt(w[i]);
    const double s = sincSqrt(w[i]);
    r(i, i) = c;
    r(i, n + i) = s;
    r(n + i, i) = -w[i] * s;
    r(n + i, n + i) = c;
  }
  return r;
}

inline Mat blockDiag2(const Mat& u) {
  const auto n = u.rows();
  Mat b = Mat::Zero(2 * n, 2 * n);
  b.topLeftCorner(n, n) = u;
  b.bottomRightCorner(n, n) = u;
  return b;
}

}  // namespace detail

enum class FreePath { Auto, ClosedForm, Exponential };

// Free-cell transfer matrix.  ClosedForm (three layers only) conjugates the
// channel propagator back from the eigenbasis of v0 and refuses classified
// boundary energies; Exponential exponentiates [[0, I], [v0 - E I, 0]] and is
// defined for every layer count and energy.
inline Mat freeTransfer(const ModelConfig& cfg, double e, FreePath path = FreePath::Auto) {
  if (!std::isfinite(e)) throw PreconditionError("freeTransfer: non-finite energy");
  const bool closedAvailable = (cfg.n == 3);
  bool useClosed = false;
  if (path == FreePath::ClosedForm) {
    if (!closedAvailable) throw PreconditionError("freeTransfer: closed form needs three layers");
    if (classifyRegime(e).regime == Regime::Boundary)
      throw PreconditionError("freeTransfer: closed form refused at boundary energy");
    useClosed = true;
  } else if (path == FreePath::Auto) {
    useClosed = closedAvailable && classifyRegime(e).regime != Regime::Boundary;
  }
  if (useClosed) {
    const Mat u = buildU();
    const Vec d = (u.transpose() * cfg.v0 * u).diagonal();
    Vec w(3);
    for (int i = 0; i < 3; ++i) w[i] = e - d[i];
    const Mat bu = detail::blockDiag2(u);
    return bu * detail::channelCell(w) * bu.transpose();
  }
  const int n = cfg.n;
  Mat h = Mat::Zero(2 * n, 2 * n);
  h.topRightCorner(n, n) = Mat::Identity(n, n);
  h.bottomLeftCorner(n, n) = cfg.v0 - e * Mat::Identity(n, n);
  return matExp(h);
}

// Derivative-jump factor [[I, 0], [diag(q), I]]; exactly symplectic.
inline Mat jumpMatrix(const Vec& q) {
  if (!q.allFinite()) throw PreconditionError("jumpMatrix: non-finite jump");
  const int n = static_cast<int>(q.size());
  Mat m = Mat::Identity(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) m(n + i, i) = q[i];
  return m;
}

struct TransferMatrix {
  SymplecticMatrix sym;
  double energy;
  Vec omega;
};

// Full cell: jump factor (random part, E-independent) times free propagator
// (deterministic part, omega-independent).
inline Mat cellTransferMat(const ModelConfig& cfg, double e, const Vec& omega,
                           FreePath path = FreePath::Auto) {
  if (omega.size() != cfg.n) throw PreconditionError("cellTransfer: omega size != layer count");
  Mat a = freeTransfer(cfg, e, path);
  const int n = cfg.n;
  // In-place product with the jump factor: bottom block rows += q .* top rows.
  for (int i = 0; i < n; ++i) a.row(n + i) += cfg.couplings[i] * omega[i] * a.row(i);
  return a;
}

// Cached variant for long products at fixed energy: reuses a precomputed
// free-cell matrix instead of rebuilding it every step.
inline Mat cellTransferMat(const ModelConfig& cfg, const Mat& aFree, const Vec& omega) {
  if (omega.size() != cfg.n) throw PreconditionError("cellTransfer: omega size != layer count");
  Mat a = aFree;
  const int n = cfg.n;
  for (int i = 0; i < n; ++i) a.row(n + i) += cfg.couplings[i] * omega[i] * a.row(i);
  return a;
}

inline TransferMatrix cellTransfer(const ModelConfig& cfg, double e, const Vec& omega,
                                   FreePath path = FreePath::Auto) {
  return TransferMatrix{checkedSymplectic(cellTransferMat(cfg, e, omega, path)), e, omega};
}

}  // namespace kplab
