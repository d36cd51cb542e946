// Runs the density certificate at the reference energy and scans an interval
// for candidate zeros of the two certificate determinants.

#include <cstdio>

#include "kplab/zariski.hpp"

int main() {
  using namespace kplab;

  const Certificate cert = certifyZariskiDense(1.6);
  std::printf("certificate at E = 1.6\n");
  std::printf("  det88     = %.6f\n", cert.det88Value);
  std::printf("  det1313   = %.6f\n", cert.det1313Value);
  std::printf("  closure   = %d of 21\n", cert.closureDim);
  std::printf("  verdict   = %s\n", cert.verdict == Verdict::Pass ? "PASS" : "UNDECIDED");
  for (const auto& digest : cert.witnessSha)
    std::printf("  witness   = %s\n", digest.c_str());
  std::printf("\n");

  std::printf("critical-set scan on [1.45, 5], step 0.002\n");
  const CriticalSet z88 = scanCriticalSet(1.45, 5.0, 0.002, DetKind::Det88);
  std::printf("  det88 zero candidates: %zu\n", z88.zeros.size());
  for (double z : z88.zeros) std::printf("    E = %.9f\n", z);
  const CriticalSet z1313 = scanCriticalSet(1.45, 5.0, 0.002, DetKind::Det1313);
  std::printf("  det1313 zero candidates: %zu\n", z1313.zeros.size());
  for (double z : z1313.zeros) std::printf("    E = %.9f\n", z);
  return 0;
}
