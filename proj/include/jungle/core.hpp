#pragma once

// Domain types and numerically stable primitives shared by every solver.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace jungle {

using NodeId = std::size_t;

/// Unordered pair of distinct nodes, stored with i < j.
struct Edge {
  NodeId i = 0;
  NodeId j = 0;

  auto operator<=>(const Edge&) const = default;
};

inline Edge make_edge(NodeId a, NodeId b) {
  if (a == b) {
    throw std::domain_error("edge endpoints must differ (node " +
                            std::to_string(a) + ")");
  }
  return a < b ? Edge{a, b} : Edge{b, a};
}

inline std::string to_string(const Edge& e) {
  return "(" + std::to_string(e.i) + "," + std::to_string(e.j) + ")";
}

// ---------------------------------------------------------------------------
// Scalar helpers

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// ln(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(x));
}

/// ln(e^a + e^b).
inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// ln sum_k e^{v_k} with max subtraction. Throws std::domain_error on empty
/// input.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) {
    throw std::domain_error("log_sum_exp of an empty sequence");
  }
  const double m = *std::max_element(values.begin(), values.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  if (m == std::numeric_limits<double>::infinity()) return m;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

/// ln C(n, k). Small k uses an exact product of ratios; otherwise log-gamma.
inline double log_binomial(std::size_t n, std::size_t k) {
  if (k > n) {
    throw std::domain_error("log_binomial: k=" + std::to_string(k) +
                            " exceeds n=" + std::to_string(n));
  }
  const std::size_t m = std::min(k, n - k);
  if (m == 0) return 0.0;
  if (m <= 64) {
    double acc = 0.0;
    const double base = static_cast<double>(n - m);
    for (std::size_t i = 1; i <= m; ++i) {
      acc += std::log((base + static_cast<double>(i)) / static_cast<double>(i));
    }
    return acc;
  }
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  return std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) -
         std::lgamma(nn - kk + 1.0);
}

// ---------------------------------------------------------------------------
// Loss distribution over default counts

/// Probability mass over default counts 0..n. Built from unnormalized log
/// weights; the linear masses are derived once at construction.
class LossPmf {
 public:
  LossPmf() = default;

  static LossPmf from_log_weights(std::vector<double> log_weights) {
    if (log_weights.empty()) {
      throw std::domain_error("LossPmf needs at least one atom");
    }
    const double log_z = log_sum_exp(log_weights);
    if (!std::isfinite(log_z)) {
      throw std::domain_error("LossPmf normalizer is not finite");
    }
    LossPmf pmf;
    pmf.log_mass_.reserve(log_weights.size());
    pmf.mass_.reserve(log_weights.size());
    for (double w : log_weights) {
      const double lm = w - log_z;
      pmf.log_mass_.push_back(lm);
      pmf.mass_.push_back(std::exp(lm));
    }
    pmf.log_normalizer_ = log_z;
    return pmf;
  }

  static LossPmf from_probabilities(std::span<const double> probabilities) {
    std::vector<double> lw;
    lw.reserve(probabilities.size());
    for (double p : probabilities) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw std::domain_error("LossPmf probabilities must be finite and >= 0");
      }
      lw.push_back(p > 0.0 ? std::log(p)
                           : -std::numeric_limits<double>::infinity());
    }
    return from_log_weights(std::move(lw));
  }

  /// Number of credits; the support is 0..n.
  std::size_t n() const { return mass_.empty() ? 0 : mass_.size() - 1; }
  const std::vector<double>& mass() const { return mass_; }
  const std::vector<double>& log_mass() const { return log_mass_; }
  double operator[](std::size_t l) const { return mass_[l]; }
  /// ln of the normalizer of the weights the pmf was built from.
  double log_normalizer() const { return log_normalizer_; }

 private:
  std::vector<double> mass_;
  std::vector<double> log_mass_;
  double log_normalizer_ = 0.0;
};

struct PmfMoments {
  double mean_rate = 0.0;  // E[l] / n
  double variance = 0.0;   // Var[l]
};

inline PmfMoments moments_from_pmf(const LossPmf& pmf) {
  const auto& m = pmf.mass();
  double mean = 0.0;
  for (std::size_t l = 0; l < m.size(); ++l) mean += m[l] * static_cast<double>(l);
  double var = 0.0;
  for (std::size_t l = 0; l < m.size(); ++l) {
    const double d = static_cast<double>(l) - mean;
    var += m[l] * d * d;
  }
  const double n = static_cast<double>(pmf.n());
  return {pmf.n() > 0 ? mean / n : 0.0, var};
}

// ---------------------------------------------------------------------------
// Recovery models

struct ConstantLgd {
  double lgd = 1.0;
};

/// Loss given default (1 + rate / p) / 2 with rate the draw's aggregate default
/// rate and p its expectation. Uncapped unless `capped` is set, in which case
/// the factor is clamped to [0, 1].
struct LinearInAggregate {
  bool capped = false;
};

/// Loss given default a + b * l_hub.
struct CentralNodeDependent {
  double a = 0.0;
  double b = 0.0;
};

using RecoveryModel = std::variant<ConstantLgd, LinearInAggregate, CentralNodeDependent>;

// ---------------------------------------------------------------------------
// Portfolio and model parameters

struct PortfolioSpec {
  std::size_t n = 0;
  std::vector<double> p;          // default probability per node
  std::map<Edge, double> rho;     // known default correlations only
  std::vector<double> exposure;   // exposure at default per node
  RecoveryModel recovery = ConstantLgd{};
  std::optional<NodeId> hub;      // designated central node, if any

  /// Joint default probability q_ij implied by p_i, p_j and rho_ij.
  double joint_default(const Edge& e, double r) const {
    const double pi = p[e.i];
    const double pj = p[e.j];
    return r * std::sqrt(pi * (1.0 - pi)) * std::sqrt(pj * (1.0 - pj)) + pi * pj;
  }
  double joint_default(const Edge& e) const { return joint_default(e, rho.at(e)); }

  /// Mean default probability across nodes.
  double mean_probability() const {
    double s = 0.0;
    for (double x : p) s += x;
    return p.empty() ? 0.0 : s / static_cast<double>(p.size());
  }
};

/// Homogeneous portfolio with unit exposures and no known correlations.
inline PortfolioSpec make_independent_spec(std::size_t n, double p) {
  PortfolioSpec s;
  s.n = n;
  s.p.assign(n, p);
  s.exposure.assign(n, 1.0);
  return s;
}

/// Hub node 0 linked to peripherals 1..n.
inline PortfolioSpec make_dandelion_spec(std::size_t n, double p, double p0, double rho) {
  PortfolioSpec s;
  s.n = n + 1;
  s.p.assign(n + 1, p);
  s.p[0] = p0;
  s.exposure.assign(n + 1, 1.0);
  for (NodeId i = 1; i <= n; ++i) s.rho[Edge{0, i}] = rho;
  s.hub = 0;
  return s;
}

/// All pairs coupled, uniform p and rho.
inline PortfolioSpec make_diamond_spec(std::size_t n, double p, double rho) {
  PortfolioSpec s = make_independent_spec(n, p);
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) s.rho[Edge{i, j}] = rho;
  }
  return s;
}

struct JungleParams {
  std::vector<double> alpha;      // field per node
  std::map<Edge, double> beta;    // coupling per edge

  std::size_t n() const { return alpha.size(); }
};

/// Default indicator per node.
using StateVector = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  kSizeMismatch,
  kProbabilityAtBoundary,
  kProbabilityOutOfRange,
  kExposureNotPositive,
  kCorrelationOutOfRange,
  kMalformedEdge,
  kJointBelowLowerBound,
  kJointAboveUpperBound,
  kRecoveryParameter,
};

struct Violation {
  ViolationKind kind;
  std::optional<NodeId> node;
  std::optional<Edge> edge;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind k) const {
    return std::any_of(violations.begin(), violations.end(),
                       [k](const Violation& v) { return v.kind == k; });
  }
  std::string summary() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.message << '\n';
    return os.str();
  }
};

inline ValidationReport validate_portfolio(const PortfolioSpec& spec) {
  ValidationReport r;
  auto add = [&r](ViolationKind k, std::optional<NodeId> node,
                  std::optional<Edge> edge, std::string msg) {
    r.violations.push_back({k, node, edge, std::move(msg)});
  };

  if (spec.p.size() != spec.n || spec.exposure.size() != spec.n) {
    add(ViolationKind::kSizeMismatch, std::nullopt, std::nullopt,
        "node arrays do not match n=" + std::to_string(spec.n));
    return r;
  }
  bool probabilities_ok = true;
  for (NodeId i = 0; i < spec.n; ++i) {
    const double p = spec.p[i];
    if (p == 0.0 || p == 1.0) {
      add(ViolationKind::kProbabilityAtBoundary, i, std::nullopt,
          "node " + std::to_string(i) + ": probability at boundary (" +
              std::to_string(p) + ")");
      probabilities_ok = false;
    } else if (!(p > 0.0 && p < 1.0)) {
      add(ViolationKind::kProbabilityOutOfRange, i, std::nullopt,
          "node " + std::to_string(i) + ": probability outside (0,1)");
      probabilities_ok = false;
    }
    if (!(spec.exposure[i] > 0.0) || !std::isfinite(spec.exposure[i])) {
      add(ViolationKind::kExposureNotPositive, i, std::nullopt,
          "node " + std::to_string(i) + ": exposure must be positive");
    }
  }
  for (const auto& [e, rho] : spec.rho) {
    const std::string tag = "edge " + to_string(e);
    if (e.i >= e.j || e.j >= spec.n) {
      add(ViolationKind::kMalformedEdge, std::nullopt, e,
          tag + ": endpoints must satisfy i < j < n");
      continue;
    }
    if (!(rho > -1.0 && rho < 1.0)) {
      add(ViolationKind::kCorrelationOutOfRange, std::nullopt, e,
          tag + ": correlation outside (-1,1)");
      continue;
    }
    if (!probabilities_ok) continue;
    const double q = spec.joint_default(e, rho);
    const double pi = spec.p[e.i];
    const double pj = spec.p[e.j];
    const double lower = std::max(0.0, pi + pj - 1.0);
    const double upper = std::min(pi, pj);
    if (!(q > lower)) {
      add(ViolationKind::kJointBelowLowerBound, std::nullopt, e,
          tag + ": q_ij below max(0, p_i+p_j-1)");
    }
    if (!(q < upper)) {
      add(ViolationKind::kJointAboveUpperBound, std::nullopt, e,
          tag + ": q_ij exceeds min(p_i,p_j)");
    }
  }

  if (const auto* c = std::get_if<ConstantLgd>(&spec.recovery)) {
    if (!(c->lgd >= 0.0 && c->lgd <= 1.0)) {
      add(ViolationKind::kRecoveryParameter, std::nullopt, std::nullopt,
          "constant lgd must lie in [0,1]");
    }
  } else if (std::holds_alternative<LinearInAggregate>(spec.recovery)) {
    if (!(spec.mean_probability() > 0.0)) {
      add(ViolationKind::kRecoveryParameter, std::nullopt, std::nullopt,
          "linear-in-aggregate recovery needs a positive expected default rate");
    }
  } else if (const auto* cn = std::get_if<CentralNodeDependent>(&spec.recovery)) {
    if (!(cn->a >= 0.0 && cn->a <= 1.0) ||
        !(cn->a + cn->b >= 0.0 && cn->a + cn->b <= 1.0)) {
      add(ViolationKind::kRecoveryParameter, std::nullopt, std::nullopt,
          "central-node recovery needs a and a+b in [0,1]");
    }
    if (!spec.hub || *spec.hub >= spec.n) {
      add(ViolationKind::kRecoveryParameter, std::nullopt, std::nullopt,
          "central-node recovery needs a designated hub node");
    }
  }
  return r;
}

}  // namespace jungle
