// Acceptance battery: one criterion per invocation, selected by argv[1].
// Each run prints exactly one PASS/FAIL line with the measured quantities
// and the pinned tolerance, and exits 0 on pass, 1 otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "kplab/ids.hpp"
#include "kplab/lyapunov.hpp"
#include "kplab/thouless.hpp"
#include "kplab/transfer.hpp"
#include "kplab/zariski.hpp"

namespace {

using kplab::Mat;
using kplab::Vec;

constexpr std::uint64_t kSeed = 20260822;

kplab::ModelConfig certifiedModel() {
  return kplab::ModelConfig::standard(3, (Vec(3) << 1, 0, 1).finished());
}

kplab::DistributionSpec certifiedDist() {
  return kplab::DistributionSpec::bernoulli(3, 0.0, 1.0, 0.5).freeze(1, 0.0);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// --- criterion 1: numeric rank-8 determinant vs its closed form ---

Outcome criterion1() {
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> draw(kplab::kSqrt2 + 0.01, 10.0);
  double worstRel = 0.0, worstAbs = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double e = draw(rng);
    const double a = kplab::det88(e);
    const double b = kplab::det88Closed(e);
    const double denom = std::max(std::abs(a), std::abs(b));
    const double diff = std::abs(a - b);
    if (denom > 1e-6)
      worstRel = std::max(worstRel, diff / denom);
    else
      worstAbs = std::max(worstAbs, diff);
  }
  Outcome o;
  o.pass = worstRel <= 1e-7 && worstAbs <= 1e-10;
  o.detail = "500 energies in (sqrt2+0.01, 10): worst relative error " + fmt(worstRel) +
             " (tol 1e-7), worst near-zero absolute " + fmt(worstAbs) + " (tol 1e-10)";
  return o;
}

// --- criterion 2: rank-13 determinant reference value ---

Outcome criterion2() {
  const double d = kplab::det1313(1.6);
  Outcome o;
  o.pass = d < 0.0 && std::abs(std::abs(d) - 3507.0) <= 0.05 * 3507.0;
  o.detail = "det1313(1.6) = " + fmt(d) +
             "; |value| within 5% of 3507 and negative under the canonical slot order";
  return o;
}

// --- criterion 3: bracket closure saturates sp(3) ---

std::vector<Mat> fullGenerators(double e) {
  std::vector<Mat> g;
  for (int l = 0; l <= 7; ++l) g.push_back(kplab::buildD1(e, l));
  for (int l = 0; l <= 10; ++l) g.push_back(kplab::buildD2(e, l));
  const auto [b0, b1] = kplab::buildBrackets(e);
  g.push_back(b0);
  g.push_back(b1);
  return g;
}

Outcome criterion3() {
  const auto z88 =
      kplab::scanCriticalSet(kplab::kSqrt2 + 0.02, 5.0, 0.002, kplab::DetKind::Det88);
  const auto z1313 =
      kplab::scanCriticalSet(kplab::kSqrt2 + 0.02, 5.0, 0.002, kplab::DetKind::Det1313);
  std::vector<double> avoid = z88.zeros;
  avoid.insert(avoid.end(), z1313.zeros.begin(), z1313.zeros.end());

  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> draw(kplab::kSqrt2 + 0.02, 5.0);
  std::vector<double> energies = {1.6};
  while (energies.size() < 21) {
    const double e = draw(rng);
    bool clear = true;
    for (double z : avoid) clear = clear && std::abs(e - z) > 0.02;
    if (clear) energies.push_back(e);
  }

  Outcome o;
  int bad = 0;
  double badAt = 0.0, badDim = 0.0;
  for (double e : energies) {
    const int dim = kplab::lieClosureDim(fullGenerators(e));
    if (dim != 21 && bad++ == 0) {
      badAt = e;
      badDim = dim;
    }
  }
  o.pass = bad == 0;
  o.detail = "closure dimension 21/21 at 1.6 and 20 random energies avoiding " +
             std::to_string(avoid.size()) + " detected determinant zeros";
  if (bad > 0)
    o.detail += "; first failure dim " + fmt(badDim) + " at E=" + fmt(badAt) + " (" +
                std::to_string(bad) + " failures)";
  return o;
}

// --- criterion 4: exponent spectrum at the certified configuration ---

Outcome criterion4() {
  kplab::LyapunovOptions lo;
  lo.steps = 1000000;
  const auto sp = kplab::estimateSpectrum(certifiedModel(), 1.6, certifiedDist(), kSeed, lo);
  const auto& g = sp.exponents;
  const auto& s = sp.stderrs;

  Outcome o;
  bool ordered = g[0] > g[1] && g[1] > g[2] && g[2] > 0.0;
  bool strong = true;
  for (int p = 0; p < 3; ++p) strong = strong && g[p] > 3.0 * s[p];
  bool gaps = g[0] - g[1] > 3.0 * (s[0] + s[1]) && g[1] - g[2] > 3.0 * (s[1] + s[2]);
  double worstSym = 0.0;
  for (int i = 0; i < 3; ++i)
    worstSym = std::max(worstSym, std::abs(g[i] + g[5 - i]) - 3.0 * (s[i] + s[5 - i]));
  bool sym = worstSym <= 0.0;

  o.pass = ordered && strong && gaps && sym;
  o.detail = "n=1e6: gamma=(" + fmt(g[0]) + ", " + fmt(g[1]) + ", " + fmt(g[2]) + "), se=(" +
             fmt(s[0]) + ", " + fmt(s[1]) + ", " + fmt(s[2]) + "); distinct>" +
             (gaps ? "3se ok" : "3se FAILED") + "; positive>" +
             (strong ? "3se ok" : "3se FAILED") +
             "; symmetry slack " + fmt(worstSym) + " (<=0 required)";
  return o;
}

// --- criterion 5: frame vs compound scheme agreement ---

Outcome criterion5() {
  const std::vector<double> energies = {0.5, 1.6, 2.2, 3.0, 4.0};
  kplab::LyapunovOptions frame, comp;
  frame.steps = comp.steps = 200000;
  comp.scheme = kplab::LyapunovScheme::ExteriorPower;

  double worstRatio = 0.0, worstE = 0.0;
  int worstP = 0;
  for (double e : energies) {
    const auto a = kplab::estimateSpectrum(certifiedModel(), e, certifiedDist(), kSeed, frame);
    const auto b = kplab::estimateSpectrum(certifiedModel(), e, certifiedDist(), kSeed, comp);
    for (int p = 0; p < 6; ++p) {
      const double tol = 3.0 * (a.stderrs[p] + b.stderrs[p]);
      const double ratio = std::abs(a.exponents[p] - b.exponents[p]) / tol;
      if (ratio > worstRatio) {
        worstRatio = ratio;
        worstE = e;
        worstP = p + 1;
      }
    }
  }
  Outcome o;
  o.pass = worstRatio <= 1.0;
  o.detail = "5 energies, n=2e5, all 6 exponents: worst |difference| / (3*(se_a+se_b)) = " +
             fmt(worstRatio) + " at E=" + fmt(worstE) + ", p=" + std::to_string(worstP) +
             " (<=1 required)";
  return o;
}

// --- criterion 6: closed-form transfer path vs matrix exponential ---

Outcome criterion6() {
  const auto cfg = certifiedModel();
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> draw(-5.0, 5.0);
  std::vector<double> energies = {-4.5, -3.0, -2.0, -1.0, 0.0, 0.5, 1.2, 1.39, 1.5, 3.0};
  while (energies.size() < 100) {
    const double e = draw(rng);
    if (kplab::classifyRegime(e).regime != kplab::Regime::Boundary) energies.push_back(e);
  }

  kplab::SampleStream stream(certifiedDist(), kSeed, 0);
  double worstEntry = 0.0, worstDefect = 0.0;
  for (double e : energies) {
    const Mat a = kplab::freeTransfer(cfg, e, kplab::FreePath::ClosedForm);
    const Mat b = kplab::freeTransfer(cfg, e, kplab::FreePath::Exponential);
    worstEntry = std::max(worstEntry, (a - b).cwiseAbs().maxCoeff());
    worstDefect =
        std::max(worstDefect, kplab::symplecticDefect(kplab::cellTransferMat(cfg, e, stream.next())));
  }

  double worstLimit = 0.0;
  for (double b : {-kplab::kSqrt2, 1.0, kplab::kSqrt2})
    for (double s : {-1.0, 1.0}) {
      const Mat lim = kplab::freeTransfer(cfg, b + s * 1e-6, kplab::FreePath::ClosedForm);
      const Mat at = kplab::freeTransfer(cfg, b, kplab::FreePath::Exponential);
      worstLimit = std::max(worstLimit, (lim - at).cwiseAbs().maxCoeff());
    }

  Outcome o;
  o.pass = worstEntry <= 1e-10 && worstDefect <= 1e-9 && worstLimit <= 1e-4;
  o.detail = "100 energies over all four regimes: worst entrywise gap " + fmt(worstEntry) +
             " (tol 1e-10); worst cell symplectic defect " + fmt(worstDefect) +
             " (tol 1e-9); worst one-sided limit gap at the degenerate energies " +
             fmt(worstLimit) + " (tol 1e-4)";
  return o;
}

// --- criterion 7: two counting oracles and the free closed form ---

Outcome criterion7() {
  const auto cfg = certifiedModel();
  const auto dist = certifiedDist();
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> draw(-1.0, 4.0);

  int worstGap = 0;
  for (int k = 0; k < 20; ++k) {
    const double e = draw(rng);
    const auto dom = kplab::makeDomain(cfg, dist, kSeed + 1 + static_cast<std::uint64_t>(k), 10);
    const int a = kplab::shootCount(dom, cfg, e);
    const int b = kplab::inertiaCount(dom, cfg, e, 400);
    worstGap = std::max(worstGap, std::abs(a - b));
  }

  const auto freeCfg = kplab::ModelConfig::standard(1, Vec::Zero(1));
  const auto freeDom =
      kplab::makeDomain(freeCfg, kplab::DistributionSpec::bernoulli(1, 0.0, 1.0, 0.5), kSeed, 10);
  bool freeExact = true;
  for (double e : {0.3, 1.0, 2.7, 5.9, 9.4})
    freeExact =
        freeExact && kplab::shootCount(freeDom, freeCfg, e) == kplab::freeDirichletCount(10, e);

  Outcome o;
  o.pass = worstGap <= 1 && freeExact;
  o.detail = "20 random (energy, realization) pairs at L=10: worst |shoot - inertia(400)| = " +
             std::to_string(worstGap) + " (<=1 required); scalar free counts " +
             (freeExact ? "match floor(2L sqrt(E)/pi) exactly" : "MISMATCH");
  return o;
}

// --- criterion 8: counting curve stability in the domain size ---

Outcome criterion8() {
  const auto cfg = certifiedModel();
  const auto dist = certifiedDist();
  std::vector<double> grid;
  for (int k = 0; k <= 140; ++k) grid.push_back(-2.0 + 0.05 * k);

  const auto a = kplab::idsCurve(cfg, dist, 20260822, 20, grid);
  const auto b = kplab::idsCurve(cfg, dist, 20260823, 40, grid);
  double sup = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    sup = std::max(sup, std::abs(a.values[i] - b.values[i]));

  Outcome o;
  o.pass = sup < 0.05;
  o.detail = "independent-seed curves L=20 vs L=40 on [-2,5] step 0.05: sup distance " +
             fmt(sup) + " (tol 0.05)";
  return o;
}

// --- criterion 9: offset identity, synthetic and measured ---

std::vector<double> identityEnergies() {
  std::vector<double> e;
  for (int k = 0; k < 12; ++k) e.push_back(1.5005 + 0.018 * k);
  return e;
}

struct PipelineResult {
  double alphaHat = 0.0;
  double maxResidual = 0.0;
  double maxExcess = -1.0;  // max(|residual| - budget); pass needs <= 0
};

PipelineResult runPipeline(int halfLength, long long steps, const std::vector<double>& energies) {
  const auto cfg = certifiedModel();
  const auto dist = certifiedDist();

  kplab::LyapunovOptions lo;
  lo.steps = steps;
  const auto scan = kplab::scanSpectrum(cfg, energies, dist, kSeed, lo, 4);

  const auto dom = kplab::makeDomain(cfg, dist, kSeed, halfLength);
  const double floor = kplab::spectrumFloor(dom, cfg);
  const double binStep = 0.01, windowTop = 30.0;
  const double gridLo = std::floor((floor - 0.5) / binStep) * binStep;
  const auto count = static_cast<long long>(std::floor((windowTop - gridLo) / binStep + 1e-9));
  std::vector<double> grid;
  for (long long k = 0; k <= count; ++k) grid.push_back(gridLo + static_cast<double>(k) * binStep);
  const auto curve = kplab::idsCurve(cfg, dist, kSeed, halfLength, grid);

  const auto measured = kplab::measureFromCurve(curve);
  const auto extended = kplab::extendMeasureTail(measured, cfg, dist, 1e8, 600);
  const auto fit = kplab::fitThouless(scan.results, extended);

  PipelineResult r;
  r.alphaHat = fit.alphaHat;
  for (std::size_t i = 0; i < fit.residuals.size(); ++i) {
    const double budget =
        kplab::thoulessBudget(scan.results[i], measured, scan.results[i].energy, halfLength);
    r.maxResidual = std::max(r.maxResidual, std::abs(fit.residuals[i]));
    r.maxExcess = std::max(r.maxExcess, std::abs(fit.residuals[i]) - budget);
  }
  return r;
}

Outcome criterion9() {
  const auto energies = identityEnergies();

  // Synthetic leg: exponent sums built from the measure itself must return
  // the planted offset exactly.
  kplab::DOSMeasure hat;
  for (int k = 0; k <= 40; ++k) hat.binEdges.push_back(-1.0 + 0.05 * k);
  for (int k = 0; k < 40; ++k) {
    const double mid = 0.5 * (hat.binEdges[k] + hat.binEdges[k + 1]);
    hat.masses.push_back(0.05 * (1.0 - mid * mid));
  }
  std::vector<kplab::LyapunovSpectrum> synth;
  for (double e : energies) {
    kplab::LyapunovSpectrum sp;
    sp.energy = e;
    const double s = -0.7 + kplab::logKernelIntegral(hat, e);
    sp.exponents = {s, 0.0, 0.0, 0.0, 0.0, -s};
    sp.stderrs.assign(6, 0.0);
    synth.push_back(std::move(sp));
  }
  const double synthErr = std::abs(kplab::fitThouless(synth, hat).alphaHat - 0.7);

  const PipelineResult fine = runPipeline(40, 1000000, energies);
  const PipelineResult coarse = runPipeline(20, 100000, energies);

  Outcome o;
  const bool synthOk = synthErr <= 1e-10;
  const bool budgetOk = fine.maxExcess <= 0.0;
  const bool trendOk = fine.maxResidual < coarse.maxResidual;
  o.pass = synthOk && budgetOk && trendOk;
  o.detail = "synthetic offset error " + fmt(synthErr) + " (tol 1e-10); L=40 n=1e6 over 12 " +
             "energies in [1.5,1.7]: max |residual| " + fmt(fine.maxResidual) +
             ", max (|residual|-budget) " + fmt(fine.maxExcess) +
             " (<=0 required); residual shrink vs L=20 n=1e5 (" + fmt(coarse.maxResidual) +
             "): " + (trendOk ? "yes" : "NO");
  return o;
}

// --- criterion 10: growth envelope and energy difference quotients ---

Outcome criterion10() {
  const auto cfg = certifiedModel();
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> draw(-5.0, 5.0);
  kplab::SampleStream stream(certifiedDist(), kSeed, 0);

  double worstEnvelope = -1e300;
  for (int i = 0; i < 10000; ++i) {
    const double e = draw(rng);
    const Vec omega = stream.next();
    const Mat cell = kplab::cellTransferMat(cfg, e, omega);
    for (int p = 1; p <= 3; ++p) {
      const double logSq = std::log(kplab::exteriorPower(cell, p).mat.squaredNorm());
      worstEnvelope = std::max(worstEnvelope, (logSq - p * std::abs(e) - p) / p);
    }
  }

  // Difference quotients on one fixed 100-point panel, evaluated at four
  // spacings a decade apart.  A Lipschitz family has h-stable quotients, so
  // the per-spacing sup may only drift mildly while h spans three decades; a
  // weaker modulus of continuity would grow the sup by orders of magnitude.
  const std::array<double, 4> spacings = {1e-1, 1e-2, 1e-3, 1e-4};
  std::array<double, 4> supQ{};
  std::uniform_real_distribution<double> drawLeft(-5.0, 4.9);
  std::vector<std::pair<double, Vec>> panel;
  for (int i = 0; i < 100; ++i) panel.emplace_back(drawLeft(rng), stream.next());
  for (std::size_t j = 0; j < spacings.size(); ++j)
    for (const auto& [e, omega] : panel) {
      const Mat a = kplab::cellTransferMat(cfg, e, omega);
      const Mat b = kplab::cellTransferMat(cfg, e + spacings[j], omega);
      for (int p = 1; p <= 3; ++p) {
        const Mat da = kplab::exteriorPower(a, p).mat;
        const Mat db = kplab::exteriorPower(b, p).mat;
        supQ[j] = std::max(supQ[j], (da - db).norm() / spacings[j]);
      }
    }
  const double worstQuotient = *std::max_element(supQ.begin(), supQ.end());
  const double hDrift = worstQuotient / *std::min_element(supQ.begin(), supQ.end());

  Outcome o;
  const double envelopeBound = 8.0;
  const double quotientCeiling = 1e4;
  const double driftBound = 2.0;
  o.pass = worstEnvelope <= envelopeBound && worstQuotient <= quotientCeiling &&
           hDrift <= driftBound;
  o.detail = "1e4 cells on [-5,5]: sup of (log ||compound||^2 - p|E| - p)/p = " +
             fmt(worstEnvelope) + " (bound " + fmt(envelopeBound) +
             "); difference quotients on a fixed panel, spacings 1e-1..1e-4: sup = " +
             fmt(worstQuotient) + " (ceiling " + fmt(quotientCeiling) +
             "), drift across spacings = " + fmt(hDrift) + "x (bound " + fmt(driftBound) + "x)";
  return o;
}

// --- criterion 11: byte-identical reruns through the executable ---

int shellRun(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion11() {
  namespace fs = std::filesystem;
  const fs::path root =
      fs::temp_directory_path() / ("kplab-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);

  const std::string common =
      "[model]\nlayers = 3\ncouplings = 1, 0, 1\n\n"
      "[distribution]\nkind = bernoulli\na = 0\nb = 1\np = 0.5\nfreeze = 2:0\n\n"
      "[run]\nseed = 20260822\n\n";
  const std::vector<std::pair<std::string, std::string>> jobs = {
      {"lyap", common + "[lyap]\nn = 2000\nblock = 10\ngrid = 1.5:1.7:0.1\n"},
      {"zariski", common + "[zariski]\nlo = 1.5\nhi = 1.52\nstep = 0.01\n"},
      {"ids", common + "[ids]\nL = 3\ngrid = -1:3:0.5\n"},
      {"thouless", common + "[thouless]\nsynthetic = true\ngrid = 1.5:1.7:0.05\n"}};

  Outcome o;
  std::string bad;
  for (const auto& [cmd, cfgText] : jobs) {
    const fs::path cfg = root / (cmd + ".ini");
    std::ofstream(cfg, std::ios::binary) << cfgText;
    const auto runTo = [&](const std::string& tag, const std::string& extra) {
      const fs::path out = root / (cmd + "-" + tag);
      if (shellRun(std::string(KPLAB_BIN) + " " + cmd + " --config " + cfg.string() +
                   " --out " + out.string() + extra) != 0)
        return fs::path();
      return out;
    };
    const fs::path a = runTo("a", "");
    const fs::path b = runTo("b", "");
    const fs::path c = runTo("c", " --workers 4");
    if (a.empty() || b.empty() || c.empty()) {
      bad += " " + cmd + "(run failed)";
      continue;
    }
    for (const char* ext : {".csv", ".json"}) {
      const std::string va = slurp(a / (cmd + ext));
      if (va.empty() || va != slurp(b / (cmd + ext)) || va != slurp(c / (cmd + ext)))
        bad += " " + cmd + ext;
    }
  }

  o.pass = bad.empty();
  o.detail = "lyap/zariski/ids/thouless rerun twice and with --workers 4: " +
             std::string(o.pass ? "all primary outputs byte-identical"
                                : "differing outputs:" + bad);
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <criterion 1..11>\n");
    return 1;
  }
  const int k = std::atoi(argv[1]);
  if (k < 1 || k > 11) {
    std::fprintf(stderr, "usage: acceptance <criterion 1..11>\n");
    return 1;
  }

  // Wall-clock budgets, seconds; 0 means no budget for that criterion.
  static const double budgets[12] = {0, 5, 1, 10, 120, 600, 5, 120, 600, 1800, 60, 0};

  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    switch (k) {
      case 1: out = criterion1(); break;
      case 2: out = criterion2(); break;
      case 3: out = criterion3(); break;
      case 4: out = criterion4(); break;
      case 5: out = criterion5(); break;
      case 6: out = criterion6(); break;
      case 7: out = criterion7(); break;
      case 8: out = criterion8(); break;
      case 9: out = criterion9(); break;
      case 10: out = criterion10(); break;
      case 11: out = criterion11(); break;
    }
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("unexpected exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const bool inBudget = budgets[k] == 0.0 || secs < budgets[k];
  const bool pass = out.pass && inBudget;
  std::printf("%s criterion %d: %s; elapsed %.1fs%s\n", pass ? "PASS" : "FAIL", k,
              out.detail.c_str(), secs,
              budgets[k] == 0.0
                  ? ""
                  : (std::string(" (budget ") + fmt(budgets[k]) + "s" +
                     (inBudget ? "" : ", EXCEEDED") + ")")
                        .c_str());
  return pass ? 0 : 1;
}
