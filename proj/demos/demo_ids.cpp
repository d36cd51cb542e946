// Compares the scalar free counting curve against its square-root law, then
// prints the counting curve of the reference random model on one realization.

#include <cmath>
#include <cstdio>
#include <vector>

#include "kplab/ids.hpp"

int main() {
  using namespace kplab;

  const int halfLength = 10;
  std::vector<double> grid;
  for (int k = 0; k <= 10; ++k) grid.push_back(static_cast<double>(k));

  const ModelConfig freeCfg = ModelConfig::standard(1, Vec::Zero(1));
  const DistributionSpec freeDist = DistributionSpec::bernoulli(1, 0.0, 1.0, 0.5);
  const IDSCurve freeCurve = idsCurve(freeCfg, freeDist, 20260822, halfLength, grid);

  std::printf("scalar free operator on [-%d, %d], Dirichlet ends\n", halfLength, halfLength);
  std::printf("  %6s  %10s  %10s\n", "E", "N_L(E)", "sqrt(E)/pi");
  for (std::size_t i = 0; i < grid.size(); ++i)
    std::printf("  %6.2f  %10.4f  %10.4f\n", grid[i], freeCurve.values[i],
                grid[i] > 0 ? std::sqrt(grid[i]) / kPi : 0.0);

  const ModelConfig cfg = ModelConfig::standard(3, (Vec(3) << 1, 0, 1).finished());
  const DistributionSpec dist = DistributionSpec::bernoulli(3, 0.0, 1.0, 0.5).freeze(1, 0.0);
  std::vector<double> grid3;
  for (int k = 0; k <= 14; ++k) grid3.push_back(-2.0 + 0.5 * k);
  const IDSCurve curve = idsCurve(cfg, dist, 20260822, halfLength, grid3);

  std::printf("\nthree-layer random model, one realization, L = %d\n", halfLength);
  std::printf("  %6s  %8s  %10s\n", "E", "count", "N_L(E)");
  for (std::size_t i = 0; i < grid3.size(); ++i)
    std::printf("  %6.2f  %8lld  %10.4f\n", grid3[i], curve.counts[i], curve.values[i]);
  return 0;
}
