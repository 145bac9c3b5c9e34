#pragma once

// Inversion of empirical default probabilities and correlations into model
// fields and couplings: closed form for the Dandelion, a two-dimensional root
// find for the Diamond, and moment matching for arbitrary topologies.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "jungle/core.hpp"
#include "jungle/enumerate.hpp"
#include "jungle/exact_models.hpp"
#include "jungle/sampler.hpp"

namespace jungle {

/// Targets outside the feasible region, or an inversion that did not converge.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& what, double residual = std::numeric_limits<double>::quiet_NaN(),
                   std::vector<double> trace = {}, bool domain = false)
      : std::runtime_error(what), residual_(residual), trace_(std::move(trace)), domain_(domain) {}

  double residual() const { return residual_; }
  const std::vector<double>& trace() const { return trace_; }
  /// True when the targets themselves are infeasible, false on non-convergence.
  bool is_domain_error() const { return domain_; }

 private:
  double residual_;
  std::vector<double> trace_;
  bool domain_;
};

template <class Params>
struct CalibrationResult {
  Params params{};
  double residual = 0.0;      // max |model moment - target|
  std::size_t iterations = 0;
  std::vector<Params> roots;  // distinct roots found by multi-start (Diamond)
  bool multiple_roots = false;
};

inline double joint_from_correlation(double p_a, double p_b, double rho) {
  return rho * std::sqrt(p_a * (1.0 - p_a)) * std::sqrt(p_b * (1.0 - p_b)) + p_a * p_b;
}

inline double correlation_from_joint(double p_a, double p_b, double q) {
  return (q - p_a * p_b) / (std::sqrt(p_a * (1.0 - p_a)) * std::sqrt(p_b * (1.0 - p_b)));
}

// ---------------------------------------------------------------------------
// Dandelion

struct DandelionEmpirical {
  std::size_t n = 1;  // peripheral count
  double p = 0.0;     // peripheral default probability
  double p0 = 0.0;    // hub default probability
  double rho = 0.0;   // hub-spoke default correlation

  double q() const { return joint_from_correlation(p, p0, rho); }
};

inline DandelionEmpirical dandelion_empirical(const DandelionParams& d) {
  const auto m = dandelion_moments(d);
  return {d.n, m.p, m.p0, m.rho};
}

namespace detail {

inline void require_probability(double x, const char* name) {
  if (!(x > 0.0 && x < 1.0)) {
    throw CalibrationError(std::string(name) + " must lie strictly inside (0,1)",
                           std::numeric_limits<double>::quiet_NaN(), {}, true);
  }
}

}  // namespace detail

/// Exact inverse of the Dandelion moment map.
inline CalibrationResult<DandelionParams> calibrate_dandelion(const DandelionEmpirical& emp) {
  if (emp.n < 1) throw CalibrationError("Dandelion needs n >= 1", std::numeric_limits<double>::quiet_NaN(), {}, true);
  detail::require_probability(emp.p, "p");
  detail::require_probability(emp.p0, "p0");
  const double q = emp.q();
  const double p = emp.p;
  const double p0 = emp.p0;
  auto fail = [](const std::string& bracket) {
    throw CalibrationError("infeasible Dandelion targets: " + bracket,
                           std::numeric_limits<double>::quiet_NaN(), {}, true);
  };
  if (!(q > 0.0)) fail("q = " + std::to_string(q) + " must be > 0");
  if (!(q < std::min(p, p0))) fail("q must be < min(p, p0)");
  if (!(q > p + p0 - 1.0)) fail("q must be > p + p0 - 1");

  const double n = static_cast<double>(emp.n);
  const double both_survive = 1.0 - p0 - p + q;
  DandelionParams d;
  d.n = emp.n;
  d.alpha = std::log((p - q) / both_survive);
  d.beta = std::log(q / (p0 - q) * both_survive / (p - q));
  d.alpha0 = (n - 1.0) * std::log((1.0 - p0) / p0) + n * std::log((p0 - q) / both_survive);

  const auto m = dandelion_moments(d);
  CalibrationResult<DandelionParams> r;
  r.params = d;
  r.residual = std::max({std::abs(m.p0 - p0), std::abs(m.p - p), std::abs(m.q - q)});
  r.iterations = 0;
  r.roots = {d};
  return r;
}

// ---------------------------------------------------------------------------
// Diamond

struct DiamondEmpirical {
  std::size_t n = 2;
  double p = 0.0;
  double rho = 0.0;

  double q() const { return joint_from_correlation(p, p, rho); }
};

struct DiamondSolveOptions {
  double tolerance = 1e-9;  // on max(|dp|, |drho|)
  std::size_t max_iterations = 200;
  bool multi_start = true;
  // Multi-start box: alpha in logit(p) +- alpha_halfwidth, beta in
  // [beta_low, beta_high] / n.
  double alpha_halfwidth = 2.0;
  double beta_low = -2.0;
  double beta_high = 8.0;
  double distinct_root_distance = 1e-4;
};

namespace detail {

struct DiamondTarget {
  double p;
  double q;
  double rho;
};

inline double diamond_residual(const DiamondMoments& m, const DiamondTarget& t) {
  return std::max(std::abs(m.p - t.p), std::abs(m.rho - t.rho));
}

/// Damped Newton on the convex dual ln Z(a, b) - a n p* - b C(n,2) q*; the
/// gradient is the moment mismatch and the Hessian the covariance of
/// (l, l(l-1)/2), so backtracking on the dual objective always makes progress.
inline bool diamond_newton(std::size_t n, const DiamondTarget& t, double alpha, double beta,
                           std::size_t max_iterations, DiamondParams& out,
                           std::size_t& iterations, double& residual) {
  const double nn = static_cast<double>(n);
  const double pairs = 0.5 * nn * (nn - 1.0);
  auto dual = [&](double a, double b, const DiamondMoments& m) {
    return m.log_z - a * nn * t.p - b * pairs * t.q;
  };
  DiamondParams cur{n, alpha, beta};
  DiamondMoments m = diamond_moments(cur);
  double f = dual(cur.alpha, cur.beta, m);
  residual = diamond_residual(m, t);
  for (iterations = 0; iterations < max_iterations; ++iterations) {
    // Stop once the moments match to working precision.
    if (std::abs(m.p - t.p) < 1e-14 && std::abs(m.q - t.q) < 1e-14) break;
    // Gradient and Hessian in natural-statistic units.
    const double g0 = nn * (m.p - t.p);
    const double g1 = pairs * (m.q - t.q);
    const double h00 = nn * m.jac_pq[0][0];
    const double h01 = nn * m.jac_pq[0][1];
    const double h11 = pairs * m.jac_pq[1][1];
    const double det = h00 * h11 - h01 * h01;
    double da;
    double db;
    if (det > 1e-300 * std::max(1.0, h00 * h11)) {
      da = -(h11 * g0 - h01 * g1) / det;
      db = -(-h01 * g0 + h00 * g1) / det;
    } else {
      da = -g0 / std::max(h00, 1e-12);
      db = -g1 / std::max(h11, 1e-12);
    }
    const double slope = g0 * da + g1 * db;
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      DiamondParams trial{n, cur.alpha + step * da, cur.beta + step * db};
      const DiamondMoments tm = diamond_moments(trial);
      const double ft = dual(trial.alpha, trial.beta, tm);
      if (std::isfinite(ft) && ft <= f + 1e-4 * step * slope + 1e-15 * std::abs(f)) {
        const double tr = diamond_residual(tm, t);
        // Near the optimum the dual is flat to rounding; keep the step only if
        // the moment mismatch does not grow.
        if (ft < f || tr <= residual) {
          cur = trial;
          m = tm;
          f = ft;
          residual = tr;
          accepted = true;
        }
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  out = cur;
  residual = diamond_residual(m, t);
  return std::isfinite(residual);
}

/// Probability-matching field for a fixed coupling; p is increasing in alpha.
inline double diamond_field_for_probability(std::size_t n, double beta, double p) {
  auto prob = [&](double a) { return diamond_moments({n, a, beta}).p; };
  double lo = logit(p) - 1.0;
  double hi = logit(p) + 1.0;
  const double shift = std::abs(beta) * static_cast<double>(n);
  for (int k = 0; k < 200 && prob(lo) > p; ++k) lo -= 1.0 + shift;
  for (int k = 0; k < 200 && prob(hi) < p; ++k) hi += 1.0 + shift;
  for (int k = 0; k < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++k) {
    const double mid = 0.5 * (lo + hi);
    (prob(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Bisection on beta with a nested solve for alpha; at fixed p the joint
/// default probability is increasing in beta.
inline DiamondParams diamond_nested_bisection(std::size_t n, const DiamondTarget& t) {
  auto joint = [&](double b) {
    const double a = diamond_field_for_probability(n, b, t.p);
    return diamond_moments({n, a, b}).q;
  };
  double lo = 0.0;
  double hi = 0.0;
  const double unit = 1.0 / static_cast<double>(n);
  if (t.q > t.p * t.p) {
    hi = unit;
    for (int k = 0; k < 60 && joint(hi) < t.q; ++k) hi *= 2.0;
  } else {
    lo = -unit;
    for (int k = 0; k < 60 && joint(lo) > t.q; ++k) lo *= 2.0;
  }
  for (int k = 0; k < 200 && hi - lo > 1e-16; ++k) {
    const double mid = 0.5 * (lo + hi);
    (joint(mid) < t.q ? lo : hi) = mid;
  }
  const double b = 0.5 * (lo + hi);
  return {n, diamond_field_for_probability(n, b, t.p), b};
}

}  // namespace detail

/// Forward map (alpha, beta) -> (p, rho).
inline DiamondEmpirical diamond_empirical(const DiamondParams& d) {
  const auto m = diamond_moments(d);
  return {d.n, m.p, m.rho};
}

inline CalibrationResult<DiamondParams> calibrate_diamond(const DiamondEmpirical& emp,
                                                          const DiamondSolveOptions& opt = {}) {
  if (emp.n < 2) throw CalibrationError("Diamond needs n >= 2", std::numeric_limits<double>::quiet_NaN(), {}, true);
  detail::require_probability(emp.p, "p");
  const double q = emp.q();
  const double nn = static_cast<double>(emp.n);
  // l(l-1) >= 0 with Var(l) >= 0 bounds the pair probability from below.
  const double q_floor = std::max(0.0, 2.0 * emp.p - 1.0);
  if (!(q > q_floor) || !(q < emp.p)) {
    throw CalibrationError("infeasible Diamond targets: q = " + std::to_string(q) +
                               " must lie in (max(0, 2p-1), p)",
                           std::numeric_limits<double>::quiet_NaN(), {}, true);
  }
  // E[l(l-1)] >= E[l]^2 - E[l] for integer-valued l (Var >= 0 is not enough
  // at finite n; the integer bound comes from l(l-1) convexity on integers).
  const double mean_l = nn * emp.p;
  const double fl = std::floor(mean_l);
  const double min_pairs = fl * (fl - 1.0) + 2.0 * fl * (mean_l - fl);  // min E[l(l-1)]
  if (!(q * nn * (nn - 1.0) > min_pairs - 1e-12)) {
    throw CalibrationError("infeasible Diamond targets: correlation below the finite-n bound",
                           std::numeric_limits<double>::quiet_NaN(), {}, true);
  }

  // Relabelling survivors as defaults keeps beta and maps alpha to
  // -alpha - (n-1) beta. Solving on the side with p <= 1/2 keeps q well
  // conditioned when p is close to one.
  if (emp.p > 0.5) {
    auto r = calibrate_diamond({emp.n, 1.0 - emp.p, emp.rho}, opt);
    auto flip = [&](DiamondParams& d) { d.alpha = -d.alpha - (nn - 1.0) * d.beta; };
    flip(r.params);
    for (auto& x : r.roots) flip(x);
    const auto m = diamond_moments(r.params);
    r.residual = std::max(std::abs(m.p - emp.p), std::abs(m.rho - emp.rho));
    return r;
  }

  const detail::DiamondTarget target{emp.p, q, emp.rho};
  CalibrationResult<DiamondParams> r;
  DiamondParams found;
  std::size_t its = 0;
  double res = 0.0;
  detail::diamond_newton(emp.n, target, logit(emp.p), 0.0, opt.max_iterations, found, its, res);
  r.iterations = its;
  if (!(res < opt.tolerance)) {
    DiamondParams fallback = detail::diamond_nested_bisection(emp.n, target);
    std::size_t more = 0;
    detail::diamond_newton(emp.n, target, fallback.alpha, fallback.beta, opt.max_iterations,
                           found, more, res);
    r.iterations += more;
  }
  r.params = found;
  r.residual = res;
  r.roots = {found};
  if (!(res < opt.tolerance)) {
    throw CalibrationError("Diamond calibration did not converge", res, {res});
  }

  if (opt.multi_start) {
    const double a0 = logit(emp.p);
    for (double a : {a0 - opt.alpha_halfwidth, a0 + opt.alpha_halfwidth}) {
      for (double b : {opt.beta_low / nn, opt.beta_high / nn}) {
        DiamondParams cand;
        std::size_t ci = 0;
        double cres = 0.0;
        detail::diamond_newton(emp.n, target, a, b, opt.max_iterations, cand, ci, cres);
        if (!(cres < opt.tolerance)) continue;
        const bool known = std::any_of(r.roots.begin(), r.roots.end(), [&](const DiamondParams& x) {
          return std::hypot(x.alpha - cand.alpha, x.beta - cand.beta) <= opt.distinct_root_distance;
        });
        if (!known) r.roots.push_back(cand);
      }
    }
    r.multiple_roots = r.roots.size() > 1;
  }
  return r;
}

// ---------------------------------------------------------------------------
// General topologies

enum class FitMode { kAuto, kExact, kSampled };

struct FitConfig {
  FitMode mode = FitMode::kAuto;
  double tolerance = -1.0;  // <= 0 selects 1e-6 (exact) or 1e-3 (sampled)
  std::size_t max_iterations = 0;  // 0 selects 200 (exact) or 400 (sampled)
  std::size_t enumeration_threshold = 20;
  std::uint64_t seed = 0;
  // Sampled mode.
  std::size_t sample_draws = 20000;  // retained draws per gradient estimate
  std::size_t sample_chains = 2;
  std::size_t sample_burn_in = 200;
};

namespace detail {

struct MomentProblem {
  std::size_t n = 0;
  std::vector<Edge> edges;
  std::vector<double> target;  // p_i then q_e
  std::size_t dim() const { return n + edges.size(); }

  JungleParams params(const Eigen::VectorXd& theta) const {
    JungleParams jp;
    jp.alpha.assign(theta.data(), theta.data() + n);
    for (std::size_t k = 0; k < edges.size(); ++k) jp.beta[edges[k]] = theta[n + k];
    return jp;
  }
};

inline MomentProblem make_problem(const PortfolioSpec& spec) {
  MomentProblem mp;
  mp.n = spec.n;
  mp.target = spec.p;
  for (const auto& [e, rho] : spec.rho) {
    mp.edges.push_back(e);
    mp.target.push_back(spec.joint_default(e, rho));
  }
  return mp;
}

struct ExactStatistics {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double log_z = 0.0;
};

/// Mean and covariance of the sufficient statistics (l_i, l_a l_b) by full
/// enumeration. Each state's outer product only touches its nonzero entries.
inline ExactStatistics exact_statistics(const MomentProblem& mp, const Eigen::VectorXd& theta,
                                        bool with_covariance) {
  const JungleParams jp = mp.params(theta);
  const auto adj = adjacency(jp);
  const std::size_t d = mp.dim();
  double e_max = -std::numeric_limits<double>::infinity();
  for_each_state(jp, adj, [&](std::uint32_t, double e) { e_max = std::max(e_max, e); });

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  Eigen::MatrixXd outer;
  if (with_covariance) outer = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  double z = 0.0;
  std::vector<std::size_t> active;
  active.reserve(d);
  for_each_state(jp, adj, [&](std::uint32_t mask, double e) {
    const double w = std::exp(e - e_max);
    z += w;
    active.clear();
    for (std::uint32_t a = mask; a; a &= a - 1) active.push_back(static_cast<std::size_t>(std::countr_zero(a)));
    for (std::size_t k = 0; k < mp.edges.size(); ++k) {
      const Edge& ed = mp.edges[k];
      if ((mask >> ed.i) & (mask >> ed.j) & 1u) active.push_back(mp.n + k);
    }
    for (std::size_t a : active) {
      sum[static_cast<Eigen::Index>(a)] += w;
      if (with_covariance) {
        for (std::size_t b : active) outer(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += w;
      }
    }
  });
  ExactStatistics s;
  s.mean = sum / z;
  s.log_z = std::log(z) + e_max;
  if (with_covariance) s.cov = outer / z - s.mean * s.mean.transpose();
  return s;
}

inline double max_abs(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

inline Eigen::VectorXd independent_start(const MomentProblem& mp) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mp.dim()));
  for (std::size_t i = 0; i < mp.n; ++i) theta[static_cast<Eigen::Index>(i)] = logit(mp.target[i]);
  return theta;
}

inline CalibrationResult<JungleParams> fit_exact(const MomentProblem& mp, double tol,
                                                 std::size_t max_iterations) {
  const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(mp.target.data(), static_cast<Eigen::Index>(mp.dim()));
  Eigen::VectorXd theta = independent_start(mp);
  auto dual = [&](const ExactStatistics& s, const Eigen::VectorXd& th) { return s.log_z - th.dot(target); };

  ExactStatistics s = exact_statistics(mp, theta, true);
  double f = dual(s, theta);
  double residual = max_abs(s.mean - target);
  std::vector<double> trace{residual};
  std::size_t it = 0;
  for (; it < max_iterations && residual >= tol * 1e-3; ++it) {
    const Eigen::VectorXd grad = s.mean - target;
    Eigen::MatrixXd h = s.cov;
    h.diagonal().array() += 1e-12 * std::max(1.0, h.diagonal().maxCoeff());
    Eigen::VectorXd step = h.ldlt().solve(-grad);
    if (!step.allFinite()) step = -grad;
    double slope = grad.dot(step);
    if (slope >= 0.0) {
      step = -grad;
      slope = -grad.squaredNorm();
    }
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd trial = theta + t * step;
      ExactStatistics ts = exact_statistics(mp, trial, true);
      const double ft = dual(ts, trial);
      if (std::isfinite(ft) && ft <= f + 1e-4 * t * slope + 1e-15 * std::abs(f)) {
        const double tr = max_abs(ts.mean - target);
        if (ft < f || tr <= residual) {
          theta = trial;
          s = std::move(ts);
          f = ft;
          residual = tr;
          accepted = true;
        }
        break;
      }
      t *= 0.5;
    }
    trace.push_back(residual);
    if (!accepted) break;
  }
  if (!(residual < tol)) {
    throw CalibrationError("general calibration did not converge (residual " +
                               std::to_string(residual) + ")",
                           residual, trace);
  }
  CalibrationResult<JungleParams> r;
  r.params = mp.params(theta);
  r.residual = residual;
  r.iterations = it;
  return r;
}

inline Eigen::VectorXd sampled_statistics(const MomentProblem& mp, const Eigen::VectorXd& theta,
                                          const McmcConfig& cfg, Eigen::VectorXd* variance) {
  const SampleSet s = gibbs_sample(mp.params(theta), cfg);
  const std::size_t d = mp.dim();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < s.size(); ++k) {
    for (std::size_t i = 0; i < mp.n; ++i) {
      if (s.defaulted(k, i)) sum[static_cast<Eigen::Index>(i)] += 1.0;
    }
    for (std::size_t e = 0; e < mp.edges.size(); ++e) {
      if (s.defaulted(k, mp.edges[e].i) && s.defaulted(k, mp.edges[e].j)) {
        sum[static_cast<Eigen::Index>(mp.n + e)] += 1.0;
      }
    }
  }
  Eigen::VectorXd mean = sum / static_cast<double>(s.size());
  // Indicator statistics: variance m(1-m).
  if (variance) *variance = mean.array() * (1.0 - mean.array());
  return mean;
}

/// Stochastic approximation: diagonally preconditioned moment-matching steps
/// with a decaying gain, Polyak averaging over the second half of the run, and
/// a final long-run estimate of the residual.
inline CalibrationResult<JungleParams> fit_sampled(const MomentProblem& mp, const FitConfig& cfg,
                                                   double tol, std::size_t max_iterations) {
  const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(mp.target.data(), static_cast<Eigen::Index>(mp.dim()));
  Eigen::VectorXd theta = independent_start(mp);
  Eigen::VectorXd average = Eigen::VectorXd::Zero(theta.size());
  std::size_t averaged = 0;
  std::vector<double> trace;

  McmcConfig mc;
  mc.chains = cfg.sample_chains;
  mc.burn_in = cfg.sample_burn_in;
  mc.thin = 1;
  mc.draws = std::max<std::size_t>(1, cfg.sample_draws / std::max<std::size_t>(1, cfg.sample_chains));

  const Eigen::VectorXd floor_var = (target.array() * (1.0 - target.array())).max(1e-4);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    mc.seed = detail::splitmix64(cfg.seed + 0x1000 * (it + 1));
    Eigen::VectorXd var;
    const Eigen::VectorXd mean = sampled_statistics(mp, theta, mc, &var);
    const Eigen::VectorXd grad = target - mean;
    trace.push_back(max_abs(grad));
    const double gain = 0.5 / (1.0 + static_cast<double>(it) / 20.0);
    theta += gain * (grad.array() / var.array().max(floor_var.array())).matrix();
    if (it >= max_iterations / 2) {
      average += theta;
      ++averaged;
    }
  }
  if (averaged) theta = average / static_cast<double>(averaged);

  McmcConfig final_cfg = mc;
  final_cfg.draws *= 5;
  final_cfg.seed = detail::splitmix64(cfg.seed ^ 0xF1A1ull);
  const Eigen::VectorXd mean = sampled_statistics(mp, theta, final_cfg, nullptr);
  const double residual = max_abs(mean - target);
  trace.push_back(residual);
  if (!(residual < tol)) {
    throw CalibrationError("sampled calibration did not reach tolerance (residual " +
                               std::to_string(residual) + ")",
                           residual, trace);
  }
  CalibrationResult<JungleParams> r;
  r.params = mp.params(theta);
  r.residual = residual;
  r.iterations = max_iterations;
  return r;
}

}  // namespace detail

/// Fields and couplings whose first moments match p_i and whose pair moments
/// match q_ij on every known edge. Exact gradients by enumeration up to the
/// threshold, sampled gradients above it.
inline CalibrationResult<JungleParams> calibrate_general(const PortfolioSpec& spec,
                                                         const FitConfig& config = {}) {
  const ValidationReport report = validate_portfolio(spec);
  if (!report.ok()) {
    throw CalibrationError("infeasible portfolio: " + report.violations.front().message,
                           std::numeric_limits<double>::quiet_NaN(), {}, true);
  }
  const detail::MomentProblem mp = detail::make_problem(spec);
  bool exact = config.mode == FitMode::kExact ||
               (config.mode == FitMode::kAuto && spec.n <= config.enumeration_threshold);
  if (exact && spec.n > kEnumerationCap) {
    throw CalibrationError("exact mode limited to n <= " + std::to_string(kEnumerationCap),
                           std::numeric_limits<double>::quiet_NaN(), {}, true);
  }

  if (mp.edges.empty()) {
    CalibrationResult<JungleParams> r;
    r.params.alpha.resize(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) r.params.alpha[i] = logit(spec.p[i]);
    return r;
  }
  if (exact) {
    const double tol = config.tolerance > 0.0 ? config.tolerance : 1e-6;
    const std::size_t iters = config.max_iterations ? config.max_iterations : 200;
    return detail::fit_exact(mp, tol, iters);
  }
  const double tol = config.tolerance > 0.0 ? config.tolerance : 1e-3;
  const std::size_t iters = config.max_iterations ? config.max_iterations : 400;
  return detail::fit_sampled(mp, config, tol, iters);
}

}  // namespace jungle
