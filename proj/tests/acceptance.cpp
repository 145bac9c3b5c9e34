// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "jungle/jungle.hpp"

using namespace jungle;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "first failure: " << what << "; ";
      pass = false;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// ---------------------------------------------------------------------------

void table_reproduction(Outcome& o) {
  struct Row {
    double rho, var, es;
  };
  const std::vector<Row> rows{{0.00, 0.041, 0.044}, {0.01, 0.043, 0.046}, {0.02, 0.049, 0.055},
                              {0.04, 0.069, 0.076}, {0.08, 0.109, 0.117}, {0.16, 0.188, 0.198},
                              {0.32, 0.344, 0.356}};
  double worst = 0.0;
  for (const Row& r : rows) {
    const LossPmf pmf = r.rho == 0.0 ? binomial_pmf(800, 0.028)
                                     : dandelion_pmf(calibrate_dandelion({800, 0.028, 0.028, r.rho}).params);
    const RiskReport rep = var_es(pmf, 0.99);
    const double dv = std::abs(rep.var - r.var);
    const double de = std::abs(rep.es - r.es);
    worst = std::max({worst, dv, de});
    o.require(dv <= 0.002 + 1e-12, "VaR at rho=" + g(r.rho) + " is " + g(rep.var));
    o.require(de <= 0.002 + 1e-12, "ES at rho=" + g(r.rho) + " is " + g(rep.es));
  }
  o.detail << "max deviation " << g(worst);
}

void critical_point(Outcome& o) {
  const auto e = diamond_empirical({80, -2.0, 0.05});
  o.require(std::abs(e.p - 0.44) <= 0.02, "forward p " + g(e.p));
  o.require(std::abs(e.rho - 0.11) <= 0.02, "forward rho " + g(e.rho));
  const PhaseGrid grid = scan_phase(80, {-6.0, 2.0, 64}, {0.0, 0.2, 64});
  o.require(grid.critical_point.has_value(), "no critical point");
  if (grid.critical_point) {
    const auto [a, b] = *grid.critical_point;
    o.require(std::abs(a + 2.0) <= 0.3, "ridge endpoint alpha " + g(a));
    o.require(std::abs(b - 0.05) <= 0.02, "ridge endpoint beta " + g(b));
    o.detail << "forward (p, rho) = (" << g(e.p) << ", " << g(e.rho) << "), endpoint (" << g(a) << ", " << g(b)
             << ")";
  }
}

void bimodality(Outcome& o) {
  const auto low = detect_peaks(diamond_pmf(calibrate_diamond({20, 0.40, 0.10}).params));
  const auto high = detect_peaks(diamond_pmf(calibrate_diamond({20, 0.40, 0.30}).params));
  o.require(low.size() == 1, "rho=0.10 gave " + std::to_string(low.size()) + " modes");
  o.require(high.size() == 2, "rho=0.30 gave " + std::to_string(high.size()) + " modes");
  o.detail << "modes " << low.size() << " and " << high.size();
}

// Direct 2^n summation, independent of the Gray-code walk.
std::vector<double> brute_force_pmf(const JungleParams& p, std::size_t counted) {
  const std::size_t n = p.n();
  std::vector<double> lw(counted + 1, -std::numeric_limits<double>::infinity());
  for (std::uint32_t m = 0; m < (1u << n); ++m) {
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (m >> i & 1u) e += p.alpha[i];
    }
    for (const auto& [ed, b] : p.beta) {
      if ((m >> ed.i & 1u) && (m >> ed.j & 1u)) e += b;
    }
    const std::size_t l = static_cast<std::size_t>(std::popcount(m >> (n - counted)));
    lw[l] = log_add_exp(lw[l], e);
  }
  return LossPmf::from_log_weights(lw).mass();
}

void oracle_equivalence(Outcome& o) {
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_exact = 0.0;
  double worst_tv = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + static_cast<std::size_t>(k % 11);  // 2..12
    const double a = -1.0 + 1.5 * u(rng);
    const double b = 0.8 * u(rng);
    JungleParams params;
    std::vector<double> closed;
    std::vector<NodeId> uncounted;
    std::string family;
    switch (k % 5) {
      case 0:
        family = "binomial";
        params = JungleParams{std::vector<double>(n, a), {}};
        closed = binomial_pmf(n, sigmoid(a)).mass();
        break;
      case 1:
        family = "pair";
        params = pair_contagion_params(n, a, b);
        closed = pair_contagion_pmf(n, a, b).mass();
        break;
      case 2: {
        family = "dandelion";
        const std::size_t np = n - 1 ? n - 1 : 1;
        const double a0 = 1.5 * u(rng);
        params = dandelion_params(np, a0, a, 2.0 * b);
        closed = dandelion_pmf({np, a0, a, 2.0 * b}).mass();
        uncounted = {0};
        break;
      }
      case 3:
        family = "diamond";
        params = diamond_params(n, a, b / static_cast<double>(n) * 4.0);
        closed = diamond_pmf({n, a, b / static_cast<double>(n) * 4.0}).mass();
        break;
      default: {
        family = "general";
        // Random topology, then the calibrated model for its own moments.
        JungleParams planted;
        planted.alpha.resize(n);
        for (double& x : planted.alpha) x = -1.0 + u(rng);
        for (NodeId i = 0; i < n; ++i) {
          for (NodeId j = i + 1; j < n; ++j) {
            if (u(rng) > 0.3) planted.beta[Edge{i, j}] = 0.6 * u(rng);
          }
        }
        const auto e = enumerate_exact(planted);
        PortfolioSpec spec = make_independent_spec(n, 0.5);
        spec.p = e.p;
        for (const auto& [ed, x] : planted.beta) spec.rho[ed] = e.correlation(ed.i, ed.j);
        FitConfig fc;
        fc.mode = FitMode::kExact;
        fc.tolerance = 1e-12;
        params = calibrate_general(spec, fc).params;
        closed = brute_force_pmf(params, n);
        break;
      }
    }
    const auto ex = enumerate_exact(params, uncounted);
    for (std::size_t l = 0; l < closed.size(); ++l) {
      const double d = std::abs(closed[l] - ex.pmf[l]);
      worst_exact = std::max(worst_exact, d);
      o.require(d <= 1e-12, family + " n=" + std::to_string(n) + " pmf differs by " + g(d));
    }
    McmcConfig mc;
    mc.chains = 4;
    mc.draws = 250000;  // 10^6 retained draws in total
    mc.thin = 1;
    mc.burn_in = 1000;
    mc.seed = static_cast<std::uint64_t>(k) + 1;
    const SampleSet s = gibbs_sample(params, mc);
    const LossPmf emp = empirical_loss_pmf(s, uncounted);
    const double tv = total_variation(emp.mass(), ex.pmf.mass());
    worst_tv = std::max(worst_tv, tv);
    o.require(tv < 0.02, family + " n=" + std::to_string(n) + " sampler TV " + g(tv));
  }
  o.detail << "max |pmf diff| " << g(worst_exact) << ", max sampler TV " << g(worst_tv);
}

void round_trips(Outcome& o) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  double worst_d = 0.0;
  int dandelion = 0;
  while (dandelion < 1000) {
    const DandelionEmpirical emp{1 + static_cast<std::size_t>(u(rng) * 999), 0.001 + 0.6 * u(rng),
                                 0.001 + 0.6 * u(rng), -0.3 + 1.2 * u(rng)};
    const double q = emp.q();
    if (!(q > 0.0 && q < std::min(emp.p, emp.p0) && q > emp.p + emp.p0 - 1.0)) continue;
    const auto r = calibrate_dandelion(emp);
    const auto m = dandelion_moments(r.params);
    const double res = std::max({std::abs(m.p - emp.p), std::abs(m.p0 - emp.p0), std::abs(m.rho - emp.rho)});
    worst_d = std::max(worst_d, res);
    o.require(res < 1e-9, "Dandelion residual " + g(res));
    ++dandelion;
  }

  // Diamond targets are forward images of random (alpha, beta) kept only if
  // they sit away from the detected transition line.
  std::map<std::size_t, PhaseGrid> grids;
  double worst_g = 0.0;
  int diamond = 0;
  int skipped = 0;
  const std::vector<std::size_t> sizes{10, 20, 40, 80};
  while (diamond < 200) {
    const std::size_t n = sizes[static_cast<std::size_t>(u(rng) * 4.0)];
    const double nn = static_cast<double>(n);
    auto it = grids.find(n);
    if (it == grids.end()) it = grids.emplace(n, scan_phase(n, {-6.0, 1.0, 48}, {0.0, 16.0 / nn, 48})).first;
    const double a = -6.0 + 7.0 * u(rng);
    const double b = (-2.0 + 18.0 * u(rng)) / nn;
    if (b >= 0.0 && it->second.ridge_distance(a, b) < 0.1) {
      ++skipped;
      continue;
    }
    const auto target = diamond_empirical({n, a, b});
    if (!(target.p > 1e-6 && target.p < 1.0 - 1e-6)) continue;
    const auto r = calibrate_diamond(target);
    const auto back = diamond_empirical(r.params);
    const double res = std::max(std::abs(back.p - target.p), std::abs(back.rho - target.rho));
    worst_g = std::max(worst_g, res);
    o.require(res < 1e-9, "Diamond residual " + g(res) + " at n=" + std::to_string(n));
    ++diamond;
  }

  double worst_j = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 3 + static_cast<std::size_t>(k % 8);  // 3..10
    JungleParams planted;
    planted.alpha.resize(n);
    for (double& x : planted.alpha) x = -3.0 + 2.5 * u(rng);
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j = i + 1; j < n; ++j) {
        if (u(rng) < 0.5) planted.beta[Edge{i, j}] = -0.5 + 1.5 * u(rng);
      }
    }
    if (planted.beta.empty()) planted.beta[Edge{0, 1}] = 0.5;
    const auto e = enumerate_exact(planted);
    PortfolioSpec spec = make_independent_spec(n, 0.5);
    spec.p = e.p;
    for (const auto& [ed, x] : planted.beta) spec.rho[ed] = e.correlation(ed.i, ed.j);
    FitConfig fc;
    fc.mode = FitMode::kExact;
    try {
      const auto r = calibrate_general(spec, fc);
      const auto back = enumerate_exact(r.params);
      double res = 0.0;
      for (NodeId i = 0; i < n; ++i) res = std::max(res, std::abs(back.p[i] - e.p[i]));
      for (const auto& [ed, x] : planted.beta) {
        res = std::max(res, std::abs(back.pair(ed.i, ed.j) - e.pair(ed.i, ed.j)));
      }
      worst_j = std::max(worst_j, res);
      o.require(res < 1e-6, "general residual " + g(res) + " at n=" + std::to_string(n));
    } catch (const CalibrationError& ex) {
      o.require(false, std::string("general calibration failed: ") + ex.what());
    }
  }
  o.detail << "max residual Dandelion " << g(worst_d) << ", Diamond " << g(worst_g) << " (" << skipped
           << " near-ridge draws skipped), general " << g(worst_j);
}

void small_contagion(Outcome& o) {
  double worst = 0.0;
  for (double p : {0.1, 0.3, 0.5}) {
    const double a = logit(p);
    const double h = 1e-7;
    const double slope = pair_contagion(10, a, h).rho_linked / h;
    const double rel = std::abs(slope - p * (1.0 - p)) / (p * (1.0 - p));
    worst = std::max(worst, rel);
    o.require(rel <= 1e-6, "slope at p=" + g(p) + " off by " + g(rel));
  }
  o.detail << "max relative error " << g(worst);
}

void mixture_identity(Outcome& o) {
  double worst = 0.0;
  int cases = 0;
  for (std::size_t n : {1u, 10u, 80u, 800u}) {
    for (double p : {0.005, 0.028, 0.1, 0.3}) {
      for (double p0 : {0.005, 0.028, 0.1, 0.3}) {
        for (double rho : {0.0, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.6}) {
          const DandelionEmpirical emp{n, p, p0, rho};
          const double q = emp.q();
          if (!(q > 0.0 && q < std::min(p, p0))) continue;
          const auto c = calibrate_dandelion(emp).params;
          const auto m = dandelion_moments(c);
          const double d = std::abs(m.p - dandelion_mixture_probability(c, m.p0));
          worst = std::max(worst, d);
          o.require(d <= 1e-10, "identity off by " + g(d));
          ++cases;
        }
      }
    }
  }
  o.detail << cases << " grid points, max deviation " << g(worst);
}

void recovery_fact(Outcome& o) {
  const std::size_t n = 30;
  PortfolioSpec spec = make_dandelion_spec(n, 0.05, 0.05, 0.2);
  spec.recovery = LinearInAggregate{};
  const auto c = calibrate_dandelion({n, 0.05, 0.05, 0.2}).params;
  McmcConfig mc;
  mc.chains = 4;
  mc.draws = 50000;
  mc.thin = 2;
  mc.burn_in = 1000;
  mc.seed = 7;
  const SampleSet s = gibbs_sample(dandelion_params(n, c.alpha0, c.alpha, c.beta), mc);
  const LossDistribution d = losses_from_states(s, spec);
  const double z = std::abs(d.mean_lgd - 1.0) / d.lgd_standard_error;
  o.require(z <= 3.0, "E[1-RR] = " + g(d.mean_lgd) + " is " + g(z) + " standard errors from 1");

  // Constant loss given default with the same expected loss.
  double exposed_mean = 0.0;
  std::vector<double> exposed(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    exposed[k] = static_cast<double>(s.loss_counts[k]);
    exposed_mean += exposed[k];
  }
  exposed_mean /= static_cast<double>(s.size());
  const double lgd = d.mean_loss / exposed_mean;
  for (double& x : exposed) x *= lgd;
  const double q_linear = d.quantile(0.999);
  const double q_constant = empirical_quantile(exposed, 0.999);
  o.require(q_linear > q_constant, "99.9% quantile " + g(q_linear) + " not above baseline " + g(q_constant));
  o.detail << "E[1-RR] " << g(d.mean_lgd) << " +- " << g(d.lgd_standard_error) << ", q99.9 " << g(q_linear)
           << " vs " << g(q_constant);
}

void transition_jump(Outcome& o) {
  const TransitionCrossing t = find_transition(50, 0.028);
  const double below = var_es(diamond_pmf(t.below_params), 0.999).var;
  const double above = var_es(diamond_pmf(t.above_params), 0.999).var;
  o.require(below > 0.0, "VaR below the ridge is zero");
  const double ratio = below > 0.0 ? above / below : 0.0;
  o.require(ratio > 3.0, "VaR ratio " + g(ratio));
  o.detail << "VaR99.9 " << g(below) << " -> " << g(above) << " (ratio " << g(ratio) << ")";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget;  // seconds
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "VaR/ES table reproduction", 5.0, table_reproduction},
      {2, "critical point", 30.0, critical_point},
      {3, "bimodality regime", 1.0, bimodality},
      {4, "oracle equivalence", 300.0, oracle_equivalence},
      {5, "calibration round-trips", 120.0, round_trips},
      {6, "small-contagion asymptotics", 1.0, small_contagion},
      {7, "mixture identity", 60.0, mixture_identity},
      {8, "recovery-rate stylized fact", 60.0, recovery_fact},
      {9, "quasi-transition jump", 60.0, transition_jump},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      c.run(o);
    } catch (const std::exception& ex) {
      o.require(false, std::string("exception: ") + ex.what());
    }
    const double secs = seconds_since(t0);
    o.require(secs < c.budget, "runtime " + g(secs) + " s over budget " + g(c.budget) + " s");
    if (!o.pass) ++failed;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
