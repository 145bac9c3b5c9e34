#pragma once

// Heat-bath Gibbs sampling of default states for arbitrary Jungle topologies,
// and the transformation of sampled states into monetary losses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jungle/core.hpp"
#include "jungle/enumerate.hpp"
#include "jungle/parallel.hpp"

namespace jungle {

class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct McmcConfig {
  std::size_t chains = 4;
  std::size_t burn_in = 1000;  // sweeps discarded per chain
  std::size_t thin = 10;       // sweeps between retained draws
  std::size_t draws = 1000;    // retained draws per chain
  std::uint64_t seed = 0;
  double disagreement_threshold = 0.05;  // TV between per-chain l-histograms
};

struct ChainDiagnostics {
  double flip_rate = 0.0;  // fraction of site updates that changed the state
  double mean_loss_count = 0.0;
  std::vector<double> loss_histogram;  // normalized, over 0..n
};

struct SamplerDiagnostics {
  std::vector<ChainDiagnostics> chains;
  double split_rhat = 1.0;     // on the loss count
  double max_chain_tv = 0.0;   // largest pairwise TV between chain histograms
  bool chains_disagree = false;
  std::vector<std::string> warnings;
};

/// Retained draws, chain-major: all draws of chain 0, then chain 1, ...
/// States are packed one bit per node, 64 nodes per word.
struct SampleSet {
  std::size_t nodes = 0;
  std::size_t chains = 0;
  std::size_t draws_per_chain = 0;
  std::size_t words_per_state = 0;
  std::vector<std::uint64_t> packed;
  std::vector<std::size_t> loss_counts;
  std::vector<double> monetary_losses;  // unit exposure, full loss until re-priced
  SamplerDiagnostics diagnostics;

  std::size_t size() const { return loss_counts.size(); }
  std::size_t chain_of(std::size_t draw) const { return draw / draws_per_chain; }

  bool defaulted(std::size_t draw, NodeId i) const {
    return (packed[draw * words_per_state + i / 64] >> (i % 64)) & 1u;
  }

  StateVector state(std::size_t draw) const {
    StateVector s(nodes);
    for (NodeId i = 0; i < nodes; ++i) s[i] = defaulted(draw, i) ? 1 : 0;
    return s;
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Uniform in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t chain_seed(std::uint64_t seed, std::size_t chain) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(chain) + 1));
}

struct ChainOutput {
  std::vector<std::uint64_t> packed;
  std::vector<std::size_t> counts;
  std::size_t flips = 0;
  std::size_t updates = 0;
};

inline ChainOutput run_chain(const JungleParams& params,
                             const std::vector<std::vector<std::pair<NodeId, double>>>& adj,
                             const McmcConfig& cfg, std::size_t chain) {
  const std::size_t n = params.n();
  const std::size_t words = (n + 63) / 64;
  std::mt19937_64 rng(chain_seed(cfg.seed, chain));

  std::vector<std::uint8_t> state(n, 0);
  std::vector<double> field(params.alpha);
  std::size_t count = 0;
  auto set = [&](NodeId i, std::uint8_t v) {
    state[i] = v;
    const double sign = v ? 1.0 : -1.0;
    for (const auto& [j, b] : adj[i]) field[j] += sign * b;
    count = v ? count + 1 : count - 1;
  };
  // Independent-limit start.
  for (NodeId i = 0; i < n; ++i) {
    if (unit_uniform(rng) < sigmoid(params.alpha[i])) set(i, 1);
  }

  ChainOutput out;
  out.packed.assign(cfg.draws * words, 0);
  out.counts.resize(cfg.draws);

  // Sites are updated in index order 0..n-1 each sweep.
  auto sweep = [&](bool record) {
    for (NodeId i = 0; i < n; ++i) {
      const std::uint8_t next = unit_uniform(rng) < sigmoid(field[i]) ? 1 : 0;
      if (next != state[i]) {
        set(i, next);
        if (record) ++out.flips;
      }
    }
    if (record) out.updates += n;
  };

  for (std::size_t s = 0; s < cfg.burn_in; ++s) sweep(false);
  for (std::size_t d = 0; d < cfg.draws; ++d) {
    for (std::size_t s = 0; s < cfg.thin; ++s) sweep(true);
    std::uint64_t* dst = out.packed.data() + d * words;
    for (NodeId i = 0; i < n; ++i) {
      if (state[i]) dst[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    out.counts[d] = count;
  }
  return out;
}

inline double split_rhat(std::span<const std::size_t> counts, std::size_t chains,
                         std::size_t per_chain) {
  const std::size_t half = per_chain / 2;
  if (half < 2) return 1.0;
  std::vector<double> means;
  std::vector<double> vars;
  for (std::size_t c = 0; c < chains; ++c) {
    for (std::size_t h = 0; h < 2; ++h) {
      const std::size_t start = c * per_chain + h * half;
      double m = 0.0;
      for (std::size_t k = 0; k < half; ++k) m += static_cast<double>(counts[start + k]);
      m /= static_cast<double>(half);
      double v = 0.0;
      for (std::size_t k = 0; k < half; ++k) {
        const double d = static_cast<double>(counts[start + k]) - m;
        v += d * d;
      }
      means.push_back(m);
      vars.push_back(v / static_cast<double>(half - 1));
    }
  }
  const double len = static_cast<double>(half);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / static_cast<double>(vars.size());
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= len / static_cast<double>(means.size() - 1);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (len - 1.0) / len * w + b / len;
  return std::sqrt(var_plus / w);
}

}  // namespace detail

inline double total_variation(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::max(a.size(), b.size());
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = k < a.size() ? a[k] : 0.0;
    const double y = k < b.size() ? b[k] : 0.0;
    s += std::abs(x - y);
  }
  return 0.5 * s;
}

inline void check(const McmcConfig& c) {
  if (c.chains < 1) throw ConfigurationError("chains must be >= 1");
  if (c.draws < 1) throw ConfigurationError("draws must be >= 1");
  if (c.thin < 1) throw ConfigurationError("thin must be >= 1");
}

/// Single-site heat-bath sampler: node i is redrawn from
/// P(l_i = 1 | rest) = sigmoid(alpha_i + sum_j beta_ij l_j). Chains run
/// concurrently and are merged in chain order; the result depends only on
/// (params, config).
inline SampleSet gibbs_sample(const JungleParams& params, const McmcConfig& config) {
  check(config);
  if (params.n() == 0) throw ConfigurationError("model has no nodes");
  for (double a : params.alpha) {
    if (!std::isfinite(a)) throw std::domain_error("field must be finite");
  }
  const auto adj = adjacency(params);
  const std::size_t n = params.n();

  std::vector<detail::ChainOutput> outputs(config.chains);
  parallel_for(config.chains, [&](std::size_t c) {
    outputs[c] = detail::run_chain(params, adj, config, c);
  });

  SampleSet s;
  s.nodes = n;
  s.chains = config.chains;
  s.draws_per_chain = config.draws;
  s.words_per_state = (n + 63) / 64;
  s.packed.reserve(config.chains * config.draws * s.words_per_state);
  s.loss_counts.reserve(config.chains * config.draws);
  for (auto& o : outputs) {
    s.packed.insert(s.packed.end(), o.packed.begin(), o.packed.end());
    s.loss_counts.insert(s.loss_counts.end(), o.counts.begin(), o.counts.end());
  }
  s.monetary_losses.assign(s.loss_counts.begin(), s.loss_counts.end());

  auto& diag = s.diagnostics;
  for (std::size_t c = 0; c < config.chains; ++c) {
    ChainDiagnostics cd;
    const auto& o = outputs[c];
    cd.flip_rate = o.updates ? static_cast<double>(o.flips) / static_cast<double>(o.updates) : 0.0;
    cd.loss_histogram.assign(n + 1, 0.0);
    double sum = 0.0;
    for (std::size_t l : o.counts) {
      cd.loss_histogram[l] += 1.0;
      sum += static_cast<double>(l);
    }
    for (double& h : cd.loss_histogram) h /= static_cast<double>(config.draws);
    cd.mean_loss_count = sum / static_cast<double>(config.draws);
    diag.chains.push_back(std::move(cd));
  }
  for (std::size_t a = 0; a < config.chains; ++a) {
    for (std::size_t b = a + 1; b < config.chains; ++b) {
      diag.max_chain_tv = std::max(
          diag.max_chain_tv,
          total_variation(diag.chains[a].loss_histogram, diag.chains[b].loss_histogram));
    }
  }
  diag.split_rhat = detail::split_rhat(s.loss_counts, config.chains, config.draws);
  diag.chains_disagree = diag.max_chain_tv > config.disagreement_threshold;
  if (diag.chains_disagree) {
    diag.warnings.push_back("chains disagree: max TV between per-chain loss histograms = " +
                            std::to_string(diag.max_chain_tv) +
                            "; equilibrium averages may be unreliable");
  }
  return s;
}

/// Empirical pmf of the number of defaults among counted nodes.
inline LossPmf empirical_loss_pmf(const SampleSet& s, std::span<const NodeId> uncounted = {}) {
  std::vector<bool> skip(s.nodes, false);
  for (NodeId u : uncounted) {
    if (u >= s.nodes) throw std::domain_error("uncounted node out of range");
    skip[u] = true;
  }
  const std::size_t counted = s.nodes - static_cast<std::size_t>(std::count(skip.begin(), skip.end(), true));
  std::vector<double> h(counted + 1, 0.0);
  for (std::size_t d = 0; d < s.size(); ++d) {
    std::size_t l = s.loss_counts[d];
    for (NodeId u : uncounted) l -= s.defaulted(d, u) ? 1 : 0;
    h[l] += 1.0;
  }
  for (double& x : h) x /= static_cast<double>(s.size());
  return LossPmf::from_probabilities(h);
}

/// Standard error of the mean of a chain-major series by batch means
/// (`batches` per chain), which accounts for autocorrelation within chains.
inline double batch_means_standard_error(std::span<const double> values, std::size_t chains,
                                         std::size_t per_chain, std::size_t batches = 10) {
  batches = std::max<std::size_t>(1, std::min(batches, per_chain));
  const std::size_t len = per_chain / batches;
  std::vector<double> means;
  for (std::size_t c = 0; c < chains; ++c) {
    for (std::size_t b = 0; b < batches; ++b) {
      double m = 0.0;
      const std::size_t start = c * per_chain + b * len;
      for (std::size_t k = 0; k < len; ++k) m += values[start + k];
      means.push_back(m / static_cast<double>(len));
    }
  }
  if (means.size() < 2) return 0.0;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
  double v = 0.0;
  for (double m : means) v += (m - grand) * (m - grand);
  v /= static_cast<double>(means.size() - 1);
  return std::sqrt(v / static_cast<double>(means.size()));
}

/// Smallest sample value x with empirical P(L <= x) >= confidence.
inline double empirical_quantile(std::vector<double> values, double confidence) {
  if (values.empty()) throw std::domain_error("quantile of an empty sample");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::domain_error("confidence must lie in (0,1)");
  }
  std::sort(values.begin(), values.end());
  const double pos = std::ceil(confidence * static_cast<double>(values.size()) - 1e-9);
  const std::size_t k = static_cast<std::size_t>(std::max(1.0, pos)) - 1;
  return values[std::min(k, values.size() - 1)];
}

struct LossDistribution {
  std::vector<double> losses;       // monetary loss per draw
  std::vector<double> lgd_factors;  // loss given default applied per draw
  double mean_loss = 0.0;
  double mean_lgd = 0.0;
  double lgd_standard_error = 0.0;  // batch means
  double loss_standard_error = 0.0;
  std::vector<std::pair<double, double>> support;  // (loss, probability), ascending

  double quantile(double confidence) const { return empirical_quantile(losses, confidence); }
};

/// Per-draw monetary loss L = f * sum_i E_i l_i with f the recovery model's
/// loss given default for that draw.
inline LossDistribution losses_from_states(const SampleSet& s, const PortfolioSpec& spec) {
  if (spec.n != s.nodes || spec.exposure.size() != s.nodes) {
    throw ConfigurationError("portfolio has " + std::to_string(spec.n) +
                             " nodes but the samples have " + std::to_string(s.nodes));
  }
  const auto* central = std::get_if<CentralNodeDependent>(&spec.recovery);
  if (central && (!spec.hub || *spec.hub >= spec.n)) {
    throw ConfigurationError("central-node recovery requires a designated hub node");
  }
  const auto* linear = std::get_if<LinearInAggregate>(&spec.recovery);
  const double expected_rate = spec.mean_probability();
  if (linear && !(expected_rate > 0.0)) {
    throw ConfigurationError("linear-in-aggregate recovery requires a positive expected rate");
  }

  LossDistribution out;
  out.losses.resize(s.size());
  out.lgd_factors.resize(s.size());
  const double nodes = static_cast<double>(s.nodes);
  for (std::size_t d = 0; d < s.size(); ++d) {
    double exposed = 0.0;
    for (NodeId i = 0; i < s.nodes; ++i) {
      if (s.defaulted(d, i)) exposed += spec.exposure[i];
    }
    double f = 1.0;
    if (const auto* c = std::get_if<ConstantLgd>(&spec.recovery)) {
      f = c->lgd;
    } else if (linear) {
      const double rate = static_cast<double>(s.loss_counts[d]) / nodes;
      f = 0.5 * (1.0 + rate / expected_rate);
      if (linear->capped) f = std::clamp(f, 0.0, 1.0);
    } else {
      f = central->a + central->b * (s.defaulted(d, *spec.hub) ? 1.0 : 0.0);
    }
    out.lgd_factors[d] = f;
    out.losses[d] = f * exposed;
  }
  const double count = static_cast<double>(s.size());
  out.mean_loss = std::accumulate(out.losses.begin(), out.losses.end(), 0.0) / count;
  out.mean_lgd = std::accumulate(out.lgd_factors.begin(), out.lgd_factors.end(), 0.0) / count;
  out.lgd_standard_error = batch_means_standard_error(out.lgd_factors, s.chains, s.draws_per_chain);
  out.loss_standard_error = batch_means_standard_error(out.losses, s.chains, s.draws_per_chain);

  std::vector<double> sorted = out.losses;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < sorted.size();) {
    std::size_t e = k;
    while (e < sorted.size() && sorted[e] == sorted[k]) ++e;
    out.support.emplace_back(sorted[k], static_cast<double>(e - k) / count);
    k = e;
  }
  return out;
}

/// Replaces the default unit-exposure losses with the portfolio's monetary
/// losses.
inline void apply_losses(SampleSet& s, const PortfolioSpec& spec) {
  s.monetary_losses = losses_from_states(s, spec).losses;
}

}  // namespace jungle
