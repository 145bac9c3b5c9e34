// Scans the complete-graph model at n = 80 for its transition line, then
// follows an iso-probability path at n = 50 through the jump in tail risk.

#include <cstdio>

#include "jungle/risk.hpp"

int main() {
  using namespace jungle;
  const PhaseGrid g = scan_phase(80, {-6.0, 2.0, 64}, {0.0, 0.2, 64});
  std::printf("transition line: %zu points\n", g.transition_line.size());
  if (g.critical_point) {
    std::printf("critical point: alpha %.3f beta %.4f\n", g.critical_point->first, g.critical_point->second);
  }

  const TransitionCrossing t = find_transition(50, 0.028);
  for (std::size_t k : {t.below, t.peak, t.above}) {
    const auto& pt = t.path[k];
    const double var = var_es(diamond_pmf({50, pt.alpha, pt.beta}), 0.999).var;
    std::printf("beta %.4f  rho %.4f  elasticity %6.2f  VaR99.9 %.3f\n", pt.beta, pt.rho, pt.elasticity, var);
  }
}
