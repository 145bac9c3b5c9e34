#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "jungle/calibration.hpp"
#include "jungle/enumerate.hpp"
#include "jungle/exact_models.hpp"
#include "jungle/risk.hpp"

using namespace jungle;

namespace {

void expect_pmf_near(const LossPmf& a, const LossPmf& b, double tol) {
  ASSERT_EQ(a.n(), b.n());
  for (std::size_t l = 0; l <= a.n(); ++l) EXPECT_NEAR(a[l], b[l], tol) << "l=" << l;
}

double sum(const LossPmf& p) {
  double s = 0.0;
  for (double m : p.mass()) s += m;
  return s;
}

}  // namespace

TEST(Binomial, FairCoin) {
  const LossPmf pmf = binomial_pmf(2, 0.5);
  EXPECT_NEAR(pmf[0], 0.25, 1e-15);
  EXPECT_NEAR(pmf[1], 0.5, 1e-15);
  EXPECT_NEAR(pmf[2], 0.25, 1e-15);
  EXPECT_EQ(probability_from_field(0.0), 0.5);
}

TEST(Binomial, MatchesEnumeration) {
  const LossPmf closed = binomial_pmf(10, 0.028);
  const auto e = enumerate_exact(JungleParams{std::vector<double>(10, logit(0.028)), {}});
  expect_pmf_near(closed, e.pmf, 1e-12);
}

TEST(Binomial, Moments) {
  const auto m = moments_from_pmf(binomial_pmf(100, 0.3));
  EXPECT_NEAR(m.mean_rate, 0.3, 1e-12);
  EXPECT_NEAR(m.variance, 21.0, 1e-9);
}

TEST(Binomial, RejectsBadInputs) {
  EXPECT_THROW(binomial_pmf(5, 0.0), std::domain_error);
  EXPECT_THROW(binomial_pmf(5, 1.0), std::domain_error);
  EXPECT_THROW(binomial_pmf(0, 0.5), std::domain_error);
}

TEST(PairContagion, DecoupledLimit) {
  expect_pmf_near(pair_contagion_pmf(9, -1.2, 0.0), binomial_pmf(9, sigmoid(-1.2)), 1e-13);
}

TEST(PairContagion, MatchesEnumeration) {
  const auto s = pair_contagion(6, -1.0, 0.5);
  const auto e = enumerate_exact(pair_contagion_params(6, -1.0, 0.5));
  expect_pmf_near(s.pmf, e.pmf, 1e-12);
  EXPECT_NEAR(s.p_linked, e.p[0], 1e-13);
  EXPECT_NEAR(s.p_unlinked, e.p[4], 1e-13);
  EXPECT_NEAR(s.q_linked, e.pair(0, 1), 1e-13);
  EXPECT_NEAR(s.rho_linked, e.correlation(0, 1), 1e-12);
}

TEST(PairContagion, CorrelationSlopeAtZeroCoupling) {
  for (double p : {0.1, 0.3, 0.5}) {
    const double a = logit(p);
    const double h = 1e-6;
    const double slope = pair_contagion(10, a, h).rho_linked / h;
    EXPECT_NEAR(slope, p * (1.0 - p), 1e-6 * p * (1.0 - p));
    // Central finite difference through zero agrees too.
    const double fd = (pair_contagion(10, a, h).rho_linked - pair_contagion(10, a, -h).rho_linked) / (2 * h);
    EXPECT_NEAR(fd, p * (1.0 - p), 1e-6 * p * (1.0 - p));
  }
}

TEST(PairContagion, PositiveCouplingRaisesLinkedProbability) {
  for (double a : {-3.0, -1.0, 0.0, 1.5}) {
    for (double b : {1e-3, 0.2, 2.0}) {
      EXPECT_GT(pair_contagion(5, a, b).p_linked, pair_contagion(5, a, 0.0).p_linked);
    }
  }
}

TEST(Dandelion, DecoupledHub) {
  expect_pmf_near(dandelion_pmf({12, 3.7, -2.0, 0.0}), binomial_pmf(12, sigmoid(-2.0)), 1e-13);
}

TEST(Dandelion, MatchesEnumerationIncludingHub) {
  const DandelionParams d{8, -2.0, -3.0, 2.0};
  const NodeId hub = 0;
  const auto e = enumerate_exact(dandelion_params(8, -2.0, -3.0, 2.0), std::span<const NodeId>(&hub, 1));
  expect_pmf_near(dandelion_pmf(d), e.pmf, 1e-12);
  const auto m = dandelion_moments(d);
  EXPECT_NEAR(m.p0, e.p[0], 1e-12);
  EXPECT_NEAR(m.p, e.p[3], 1e-12);
  EXPECT_NEAR(m.q, e.pair(0, 5), 1e-12);
  EXPECT_NEAR(m.log_z, e.log_z, 1e-11);
}

TEST(Dandelion, DerivativeFormulasMatchDirectSums) {
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + trial % 12;
    const DandelionParams d{n, 3.0 * u(rng), 2.5 * u(rng) - 1.0, 3.0 * u(rng)};
    const auto e = enumerate_exact(dandelion_params(d.n, d.alpha0, d.alpha, d.beta));
    const auto m = dandelion_moments(d);
    EXPECT_NEAR(m.p0, e.p[0], 1e-10);
    EXPECT_NEAR(m.p, e.p[1], 1e-10);
    EXPECT_NEAR(m.q, e.pair(0, 1), 1e-10);
    EXPECT_NEAR(m.rho, e.correlation(0, 1), 1e-9);
  }
}

TEST(Dandelion, MixtureIdentity) {
  for (double rho : {0.0, 0.01, 0.08, 0.32, 0.6}) {
    for (double p0 : {0.01, 0.028, 0.2}) {
      const DandelionEmpirical emp{50, 0.028, p0, rho};
      if (!(emp.q() < std::min(emp.p, emp.p0))) continue;
      const auto c = calibrate_dandelion(emp);
      const auto m = dandelion_moments(c.params);
      EXPECT_NEAR(m.p, dandelion_mixture_probability(c.params, m.p0), 1e-10);
    }
  }
}

TEST(Dandelion, ContagionBothWays) {
  // Higher correlation at fixed p = p0 piles mass on zero losses and pushes
  // the tail out.
  double prev_zero = -1.0;
  std::size_t prev_var = 0;
  for (double rho : {0.0, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32}) {
    const LossPmf pmf = rho == 0.0 ? binomial_pmf(800, 0.028)
                                   : dandelion_pmf(calibrate_dandelion({800, 0.028, 0.028, rho}).params);
    const std::size_t v = var_es(pmf, 0.999).var_count;
    EXPECT_GT(pmf[0], prev_zero) << "rho=" << rho;
    EXPECT_GT(v, prev_var) << "rho=" << rho;
    prev_zero = pmf[0];
    prev_var = v;
  }
}

TEST(Diamond, NonInteractingLimit) {
  expect_pmf_near(diamond_pmf({15, -0.7, 0.0}), binomial_pmf(15, sigmoid(-0.7)), 1e-13);
}

TEST(Diamond, MatchesEnumeration) {
  const auto e = enumerate_exact(diamond_params(10, -1.0, 0.3));
  expect_pmf_near(diamond_pmf({10, -1.0, 0.3}), e.pmf, 1e-12);
  const auto mo = moments_from_pmf(diamond_pmf({10, -1.0, 0.3}));
  const auto me = moments_from_pmf(e.pmf);
  EXPECT_NEAR(mo.mean_rate, me.mean_rate, 1e-12);
  EXPECT_NEAR(mo.variance, me.variance, 1e-11);
  const auto dm = diamond_moments({10, -1.0, 0.3});
  EXPECT_NEAR(dm.p, e.p[2], 1e-12);
  EXPECT_NEAR(dm.q, e.pair(3, 7), 1e-12);
}

TEST(Diamond, ReflectionAtZeroCoupling) {
  const LossPmf a = diamond_pmf({13, 0.8, 0.0});
  const LossPmf b = diamond_pmf({13, -0.8, 0.0});
  for (std::size_t l = 0; l <= 13; ++l) EXPECT_NEAR(a[l], b[13 - l], 1e-12);
}

TEST(Diamond, LargeNDoesNotOverflow) {
  const LossPmf pmf = diamond_pmf({20000, -3.0, 0.01});
  EXPECT_NEAR(sum(pmf), 1.0, 1e-12);
  for (double m : pmf.mass()) EXPECT_TRUE(std::isfinite(m));
}

TEST(Diamond, JacobianMatchesFiniteDifferences) {
  const DiamondParams d{30, -2.0, 0.08};
  const auto m = diamond_moments(d);
  const double h = 1e-6;
  const auto pa = diamond_moments({30, d.alpha + h, d.beta});
  const auto ma = diamond_moments({30, d.alpha - h, d.beta});
  const auto pb = diamond_moments({30, d.alpha, d.beta + h});
  const auto mb = diamond_moments({30, d.alpha, d.beta - h});
  EXPECT_NEAR(m.jac_prho[0][0], (pa.p - ma.p) / (2 * h), 1e-7);
  EXPECT_NEAR(m.jac_prho[0][1], (pb.p - mb.p) / (2 * h), 1e-7);
  EXPECT_NEAR(m.jac_prho[1][0], (pa.rho - ma.rho) / (2 * h), 1e-7);
  EXPECT_NEAR(m.jac_prho[1][1], (pb.rho - mb.rho) / (2 * h), 1e-6);
}

TEST(Oracle, RandomizedGridAllFamilies) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + trial % 13;  // 2..14
    const double a = 2.0 * u(rng) - 0.5;
    const double b = 1.0 * u(rng);
    expect_pmf_near(diamond_pmf({n, a, b}), enumerate_exact(diamond_params(n, a, b)).pmf, 1e-12);
    expect_pmf_near(pair_contagion_pmf(n, a, b), enumerate_exact(pair_contagion_params(n, a, b)).pmf, 1e-12);
    const std::size_t nd = 1 + trial % 13;  // 2^(nd+1) states
    const NodeId hub = 0;
    const double a0 = 2.0 * u(rng);
    expect_pmf_near(dandelion_pmf({nd, a0, a, 2.0 * b}),
                    enumerate_exact(dandelion_params(nd, a0, a, 2.0 * b), std::span<const NodeId>(&hub, 1)).pmf,
                    1e-12);
  }
}

TEST(Pmf, AlwaysNormalized) {
  for (const LossPmf& p : {binomial_pmf(800, 0.028), dandelion_pmf({800, -30.0, -3.6, 2.0}),
                           diamond_pmf({80, -2.0, 0.05}), pair_contagion_pmf(40, 1.0, -2.0)}) {
    EXPECT_NEAR(sum(p), 1.0, 1e-12);
    for (double m : p.mass()) EXPECT_GE(m, 0.0);
  }
}
