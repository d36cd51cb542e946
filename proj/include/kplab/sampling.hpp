#pragma once
// Coupling-law specification and seeded sampling.  Generation is counter
// based: draw k is a pure function of (seed, stream, k), so parallel workers
// can take disjoint deterministic substreams with no shared state.

#include <cstdint>
#include <vector>

#include "core.hpp"

namespace kplab {

enum class DistKind { BernoulliPerChannel, UniformBox, DiscreteSet };

struct DistributionSpec {
  int n = 0;
  DistKind kind = DistKind::BernoulliPerChannel;
  // BernoulliPerChannel: value a with prob 1-p, value b with prob p, per channel.
  Vec bernoulliA, bernoulliB;
  double bernoulliP = 0.5;
  // UniformBox: independent uniform draw in [lo_i, hi_i] per channel.
  Vec boxLo, boxHi;
  // DiscreteSet: weighted atoms in R^n.
  std::vector<Vec> atoms;
  std::vector<double> weights;
  // Deterministic channels: frozen[i] >= 0 pins channel i to frozen[i]'s value.
  std::vector<bool> frozen;
  Vec frozenValue;

  static DistributionSpec bernoulli(int n, double a, double b, double p) {
    DistributionSpec s;
    s.n = n;
    s.kind = DistKind::BernoulliPerChannel;
    s.bernoulliA = Vec::Constant(n, a);
    s.bernoulliB = Vec::Constant(n, b);
    s.bernoulliP = p;
    s.frozen.assign(n, false);
    s.frozenValue = Vec::Zero(n);
    return s;
  }
  static DistributionSpec uniformBox(int n, Vec lo, Vec hi) {
    DistributionSpec s;
    s.n = n;
    s.kind = DistKind::UniformBox;
    s.boxLo = std::move(lo);
    s.boxHi = std::move(hi);
    s.frozen.assign(n, false);
    s.frozenValue = Vec::Zero(n);
    return s;
  }
  static DistributionSpec discreteSet(int n, std::vector<Vec> atoms, std::vector<double> weights) {
    DistributionSpec s;
    s.n = n;
    s.kind = DistKind::DiscreteSet;
    s.atoms = std::move(atoms);
    s.weights = std::move(weights);
    s.frozen.assign(n, false);
    s.frozenValue = Vec::Zero(n);
    return s;
  }
  DistributionSpec& freeze(int channel, double value) {
    frozen.at(channel) = true;
    frozenValue[channel] = value;
    return *this;
  }

  // Per-channel expected value, frozen channels pinned to their value.
  Vec means() const {
    validate();
    Vec mu = Vec::Zero(n);
    switch (kind) {
      case DistKind::BernoulliPerChannel:
        mu = (1.0 - bernoulliP) * bernoulliA + bernoulliP * bernoulliB;
        break;
      case DistKind::UniformBox:
        mu = 0.5 * (boxLo + boxHi);
        break;
      case DistKind::DiscreteSet: {
        double total = 0.0;
        for (std::size_t k = 0; k < atoms.size(); ++k) {
          mu += weights[k] * atoms[k];
          total += weights[k];
        }
        if (!(total > 0)) throw ConfigError("distribution: zero total weight");
        mu /= total;
        break;
      }
    }
    for (int i = 0; i < n; ++i)
      if (frozen[static_cast<std::size_t>(i)]) mu[i] = frozenValue[i];
    return mu;
  }

  void validate() const {
    if (n < 1) throw ConfigError("distribution: channel count must be positive");
    switch (kind) {
      case DistKind::BernoulliPerChannel:
        if (bernoulliA.size() != n || bernoulliB.size() != n)
          throw ConfigError("distribution: bernoulli values need one (a,b) per channel");
        if (!(bernoulliP >= 0.0 && bernoulliP <= 1.0))
          throw ConfigError("distribution: bernoulli probability outside [0,1]");
        break;
      case DistKind::UniformBox:
        if (boxLo.size() != n || boxHi.size() != n)
          throw ConfigError("distribution: box bounds need one (lo,hi) per channel");
        for (int i = 0; i < n; ++i)
          if (!(boxLo[i] <= boxHi[i])) throw ConfigError("distribution: box lo > hi");
        break;
      case DistKind::DiscreteSet:
        if (atoms.empty() || atoms.size() != weights.size())
          throw ConfigError("distribution: atoms/weights mismatch");
        for (const auto& a : atoms)
          if (a.size() != n) throw ConfigError("distribution: atom dimension != channel count");
        for (double w : weights)
          if (!(w >= 0)) throw ConfigError("distribution: negative weight");
        break;
    }
    if (static_cast<int>(frozen.size()) != n || frozenValue.size() != n)
      throw ConfigError("distribution: frozen-channel bookkeeping corrupt");
  }
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Stateless draw: full-avalanche hash of (seed, stream, counter, slot).
inline std::uint64_t counterDraw(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t counter, std::uint64_t slot) {
  std::uint64_t x = mix64(seed ^ 0x243F6A8885A308D3ull);
  x = mix64(x ^ stream * 0x9E3779B97F4A7C15ull);
  x = mix64(x ^ counter * 0xD1B54A32D192ED03ull);
  return mix64(x ^ slot * 0x8CB92BA72F3D8DD7ull);
}

inline double unitDouble(std::uint64_t r) { return static_cast<double>(r >> 11) * 0x1.0p-53; }

}  // namespace detail

struct SampleStream {
  DistributionSpec spec;
  std::uint64_t seed = 0;
  std::uint64_t streamId = 0;
  std::uint64_t counter = 0;

  SampleStream(DistributionSpec s, std::uint64_t seed_, std::uint64_t stream_ = 0)
      : spec(std::move(s)), seed(seed_), streamId(stream_) {
    spec.validate();
  }

  // Independent deterministic substream; counters restart at zero.
  SampleStream substream(std::uint64_t id) const {
    SampleStream s(spec, seed, id);
    return s;
  }

  Vec next() {
    Vec v(spec.n);
    switch (spec.kind) {
      case DistKind::BernoulliPerChannel:
        for (int i = 0; i < spec.n; ++i) {
          const double u = detail::unitDouble(detail::counterDraw(seed, streamId, counter, i));
          v[i] = u < spec.bernoulliP ? spec.bernoulliB[i] : spec.bernoulliA[i];
        }
        break;
      case DistKind::UniformBox:
        for (int i = 0; i < spec.n; ++i) {
          const double u = detail::unitDouble(detail::counterDraw(seed, streamId, counter, i));
          v[i] = spec.boxLo[i] + u * (spec.boxHi[i] - spec.boxLo[i]);
        }
        break;
      case DistKind::DiscreteSet: {
        double total = 0;
        for (double w : spec.weights) total += w;
        double u = detail::unitDouble(detail::counterDraw(seed, streamId, counter, 0)) * total;
        std::size_t pick = 0;
        for (; pick + 1 < spec.weights.size(); ++pick) {
          if (u < spec.weights[pick]) break;
          u -= spec.weights[pick];
        }
        v = spec.atoms[pick];
        break;
      }
    }
    for (int i = 0; i < spec.n; ++i)
      if (spec.frozen[i]) v[i] = spec.frozenValue[i];
    ++counter;
    return v;
  }

  std::vector<Vec> sample(long count) {
    if (count < 0) throw PreconditionError("sample: negative count");
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) out.push_back(next());
    return out;
  }
};

struct SpanWitness {
  bool spans = false;
  std::vector<Vec> witness;  // linearly independent support differences
};

// Checks that support differences span the random (non-frozen) channels.
// Box supports with nonempty interior witness by axis-aligned differences;
// discrete kinds by the rank of the difference matrix.
inline SpanWitness verifySpanCondition(const DistributionSpec& spec) {
  spec.validate();
  std::vector<int> randomChannels;
  for (int i = 0; i < spec.n; ++i)
    if (!spec.frozen[i]) randomChannels.push_back(i);
  const int d = static_cast<int>(randomChannels.size());
  SpanWitness w;
  if (d == 0) {
    w.spans = true;  // nothing random, nothing to span
    return w;
  }

  std::vector<Vec> supportPoints;
  switch (spec.kind) {
    case DistKind::BernoulliPerChannel: {
      // Axis differences (b_i - a_i) e_i suffice when the two values differ.
      bool all = true;
      for (int i : randomChannels) {
        const double diff = spec.bernoulliB[i] - spec.bernoulliA[i];
        if (diff == 0.0 || spec.bernoulliP <= 0.0 || spec.bernoulliP >= 1.0) {
          all = false;
          break;
        }
        Vec e = Vec::Zero(spec.n);
        e[i] = diff;
        w.witness.push_back(e);
      }
      w.spans = all;
      if (!all) w.witness.clear();
      return w;
    }
    case DistKind::UniformBox: {
      bool all = true;
      for (int i : randomChannels) {
        const double diff = spec.boxHi[i] - spec.boxLo[i];
        if (diff <= 0.0) {
          all = false;
          break;
        }
        Vec e = Vec::Zero(spec.n);
        e[i] = diff;
        w.witness.push_back(e);
      }
      w.spans = all;
      if (!all) w.witness.clear();
      return w;
    }
    case DistKind::DiscreteSet:
      supportPoints = spec.atoms;
      break;
  }

  // Rank of {x - y} restricted to random channels, with independent rows
  // recovered as the witness.
  const auto m = supportPoints.size();
  if (m < 2) return w;
  Mat diffs(static_cast<int>(m - 1), d);
  for (std::size_t k = 1; k < m; ++k)
    for (int j = 0; j < d; ++j)
      diffs(static_cast<int>(k - 1), j) =
          supportPoints[k][randomChannels[j]] - supportPoints[0][randomChannels[j]];
  Eigen::ColPivHouseholderQR<Mat> qr(diffs.transpose());
  qr.setThreshold(1e-12);
  const int rank = static_cast<int>(qr.rank());
  w.spans = (rank == d);
  if (w.spans) {
    // The pivot columns of diffs^T are independent difference vectors.
    const auto& perm = qr.colsPermutation();
    for (int k = 0; k < d; ++k) {
      const int row = perm.indices()[k];
      Vec full = Vec::Zero(spec.n);
      for (int j = 0; j < d; ++j) full[randomChannels[j]] = diffs(row, j);
      w.witness.push_back(full);
    }
  }
  return w;
}

}  // namespace kplab
