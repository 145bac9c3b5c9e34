#pragma once

// Closed-form loss distributions for the exactly solvable Jungle instances:
// independent credits, a single coupled pair, the hub-and-spokes Dandelion and
// the complete-graph Diamond.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "jungle/core.hpp"

namespace jungle {

// ---------------------------------------------------------------------------
// Independent credits

inline double probability_from_field(double alpha) { return sigmoid(alpha); }
inline double field_from_probability(double p) { return logit(p); }

inline LossPmf binomial_pmf(std::size_t n, double p) {
  if (n < 1) throw std::domain_error("binomial_pmf: n must be >= 1");
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("binomial_pmf: p must lie strictly inside (0,1)");
  }
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  std::vector<double> lw(n + 1);
  for (std::size_t l = 0; l <= n; ++l) {
    lw[l] = log_binomial(n, l) + static_cast<double>(l) * lp +
            static_cast<double>(n - l) * lq;
  }
  return LossPmf::from_log_weights(std::move(lw));
}

/// Same distribution parameterized by the field alpha; stays exact when
/// sigmoid(alpha) rounds to 0 or 1.
inline LossPmf binomial_pmf_from_field(std::size_t n, double alpha) {
  if (n < 1) throw std::domain_error("binomial_pmf: n must be >= 1");
  std::vector<double> lw(n + 1);
  for (std::size_t l = 0; l <= n; ++l) {
    lw[l] = log_binomial(n, l) + alpha * static_cast<double>(l);
  }
  return LossPmf::from_log_weights(std::move(lw));
}

// ---------------------------------------------------------------------------
// One coupled pair (nodes 1 and 2) in an otherwise independent portfolio

struct PairContagionSolution {
  LossPmf pmf;
  double p_linked = 0.0;    // <l_1> = <l_2>
  double p_unlinked = 0.0;  // <l_j>, j >= 3
  double q_linked = 0.0;    // <l_1 l_2>
  double rho_linked = 0.0;  // correlation of l_1 and l_2
};

inline PairContagionSolution pair_contagion(std::size_t n, double alpha, double beta) {
  if (n < 2) throw std::domain_error("pair_contagion: n must be >= 2");

  // Pair weights by number of defaults in the pair: 1, 2e^a, e^{2a+b}.
  const double pair_lw[3] = {0.0, std::log(2.0) + alpha, 2.0 * alpha + beta};
  const std::size_t rest = n - 2;
  std::vector<double> lw(n + 1);
  for (std::size_t l = 0; l <= n; ++l) {
    double acc = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= 2 && k <= l; ++k) {
      const std::size_t m = l - k;
      if (m > rest) continue;
      acc = log_add_exp(acc, pair_lw[k] + log_binomial(rest, m) +
                                 alpha * static_cast<double>(m));
    }
    lw[l] = acc;
  }

  PairContagionSolution out;
  out.pmf = LossPmf::from_log_weights(std::move(lw));

  const double log_zp = log_add_exp(log_add_exp(pair_lw[0], pair_lw[1]), pair_lw[2]);
  out.q_linked = std::exp(pair_lw[2] - log_zp);
  out.p_linked = std::exp(log_add_exp(alpha, pair_lw[2]) - log_zp);
  out.p_unlinked = sigmoid(alpha);
  // q - p^2 = e^{2a} (e^b - 1) / Z_pair^2, free of cancellation.
  const double cov = std::expm1(beta) * std::exp(2.0 * alpha - 2.0 * log_zp);
  out.rho_linked = cov / (out.p_linked * (1.0 - out.p_linked));
  return out;
}

inline LossPmf pair_contagion_pmf(std::size_t n, double alpha, double beta) {
  return pair_contagion(n, alpha, beta).pmf;
}

// ---------------------------------------------------------------------------
// Dandelion: hub 0 coupled to n peripheral nodes with a common field

struct DandelionParams {
  std::size_t n = 1;   // peripheral count
  double alpha0 = 0.0; // hub field
  double alpha = 0.0;  // peripheral field
  double beta = 0.0;   // hub-spoke coupling
};

struct DandelionMoments {
  double p0 = 0.0;   // <l_0>
  double p = 0.0;    // mean peripheral default probability
  double q = 0.0;    // <l_0 l_i>
  double rho = 0.0;  // hub-spoke default correlation
  double log_z = 0.0;
};

inline void check(const DandelionParams& d) {
  if (d.n < 1) throw std::domain_error("Dandelion needs at least one peripheral node");
  if (!std::isfinite(d.alpha0) || !std::isfinite(d.alpha) || !std::isfinite(d.beta)) {
    throw std::domain_error("Dandelion parameters must be finite");
  }
}

/// Pmf of the peripheral default count; the hub is summed out.
inline LossPmf dandelion_pmf(const DandelionParams& d) {
  check(d);
  std::vector<double> lw(d.n + 1);
  for (std::size_t l = 0; l <= d.n; ++l) {
    const double x = static_cast<double>(l);
    lw[l] = log_binomial(d.n, l) +
            log_add_exp(d.alpha * x, d.alpha0 + x * (d.alpha + d.beta));
  }
  return LossPmf::from_log_weights(std::move(lw));
}

/// ln Z = ln[(1+e^a)^n + e^{a0} (1+e^{a+b})^n].
inline double dandelion_log_partition(const DandelionParams& d) {
  const double n = static_cast<double>(d.n);
  return log_add_exp(n * softplus(d.alpha), d.alpha0 + n * softplus(d.alpha + d.beta));
}

/// Hub probability, peripheral probability and joint default from the
/// derivatives of ln Z.
inline DandelionMoments dandelion_moments(const DandelionParams& d) {
  check(d);
  const double n = static_cast<double>(d.n);
  DandelionMoments m;
  m.log_z = dandelion_log_partition(d);
  m.p0 = sigmoid(d.alpha0 + n * (softplus(d.alpha + d.beta) - softplus(d.alpha)));
  m.q = m.p0 * sigmoid(d.alpha + d.beta);
  // e^{a0} (e^b - 1) (1 + e^{a+b})^{n-1} / Z; the exponent is <= 0.
  const double excess = std::exp(d.alpha0 + (n - 1.0) * softplus(d.alpha + d.beta) -
                                 m.log_z) *
                        std::expm1(d.beta);
  m.p = sigmoid(d.alpha) * (1.0 + excess);
  m.rho = (m.q - m.p * m.p0) /
          (std::sqrt(m.p * (1.0 - m.p)) * std::sqrt(m.p0 * (1.0 - m.p0)));
  return m;
}

/// Peripheral default probability as a two-state mixture: the hub's "good"
/// state with weight 1 - p0 and its "bad" state with weight p0.
inline double dandelion_mixture_probability(const DandelionParams& d, double p0) {
  return (1.0 - p0) * sigmoid(d.alpha) + p0 * sigmoid(d.alpha + d.beta);
}

// ---------------------------------------------------------------------------
// Diamond: every pair coupled with a common beta

struct DiamondParams {
  std::size_t n = 2;
  double alpha = 0.0;
  double beta = 0.0;
};

inline void check(const DiamondParams& d) {
  if (d.n < 2) throw std::domain_error("Diamond needs at least two nodes");
  if (!std::isfinite(d.alpha) || !std::isfinite(d.beta)) {
    throw std::domain_error("Diamond parameters must be finite");
  }
}

/// Unnormalized ln weight of all states with l defaults.
inline double diamond_log_weight(const DiamondParams& d, std::size_t l) {
  const double x = static_cast<double>(l);
  return log_binomial(d.n, l) + (d.alpha - 0.5 * d.beta) * x + 0.5 * d.beta * x * x;
}

inline LossPmf diamond_pmf(const DiamondParams& d) {
  check(d);
  std::vector<double> lw(d.n + 1);
  for (std::size_t l = 0; l <= d.n; ++l) lw[l] = diamond_log_weight(d, l);
  return LossPmf::from_log_weights(std::move(lw));
}

/// First and second moments of the sufficient statistics (l, l(l-1)/2), with
/// the Jacobians of (p, q) and (p, rho) with respect to (alpha, beta).
struct DiamondMoments {
  double p = 0.0;
  double q = 0.0;
  double rho = 0.0;
  double log_z = 0.0;
  // d(p, q)/d(alpha, beta), row-major: [dp/da, dp/db; dq/da, dq/db]
  double jac_pq[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  // d(p, rho)/d(alpha, beta)
  double jac_prho[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
};

inline DiamondMoments diamond_moments(const DiamondParams& d) {
  const LossPmf pmf = diamond_pmf(d);
  const auto& m = pmf.mass();
  const double n = static_cast<double>(d.n);
  const double pairs = 0.5 * n * (n - 1.0);

  double mean_l = 0.0;
  double mean_k = 0.0;  // k = l(l-1)/2
  double mean_s = 0.0;  // survivors, summed separately so 1 - p keeps its precision
  for (std::size_t l = 0; l <= d.n; ++l) {
    const double x = static_cast<double>(l);
    mean_l += m[l] * x;
    mean_k += m[l] * 0.5 * x * (x - 1.0);
    mean_s += m[l] * (n - x);
  }
  double var_l = 0.0;
  double var_k = 0.0;
  double cov_lk = 0.0;
  for (std::size_t l = 0; l <= d.n; ++l) {
    const double x = static_cast<double>(l);
    const double dl = x - mean_l;
    const double dk = 0.5 * x * (x - 1.0) - mean_k;
    var_l += m[l] * dl * dl;
    var_k += m[l] * dk * dk;
    cov_lk += m[l] * dl * dk;
  }

  DiamondMoments out;
  out.log_z = pmf.log_normalizer();
  out.p = mean_l / n;
  out.q = mean_k / pairs;
  const double s = out.p * (mean_s / n);
  // Var(l) = n s + n (n - 1) (q - p^2) avoids subtracting two nearly equal
  // second moments.
  out.rho = (var_l - n * s) / (n * (n - 1.0) * s);

  out.jac_pq[0][0] = var_l / n;
  out.jac_pq[0][1] = cov_lk / n;
  out.jac_pq[1][0] = cov_lk / pairs;
  out.jac_pq[1][1] = var_k / pairs;

  // rho = (q - p^2) / (p (1 - p))
  const double drho_dq = 1.0 / s;
  const double drho_dp =
      (-2.0 * out.p * s - (out.q - out.p * out.p) * (1.0 - 2.0 * out.p)) / (s * s);
  for (int c = 0; c < 2; ++c) {
    out.jac_prho[0][c] = out.jac_pq[0][c];
    out.jac_prho[1][c] = drho_dp * out.jac_pq[0][c] + drho_dq * out.jac_pq[1][c];
  }
  return out;
}

/// Frobenius norm of d(p, rho)/d(alpha, beta).
inline double diamond_sensitivity(const DiamondParams& d) {
  const auto m = diamond_moments(d);
  double s = 0.0;
  for (const auto& row : m.jac_prho) {
    for (double v : row) s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace jungle
