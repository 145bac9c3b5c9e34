#pragma once

// Brute-force summation over all 2^n default states. Used as the reference
// every closed form and the sampler are checked against, and as the exact
// gradient source for small-portfolio calibration.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jungle/core.hpp"

namespace jungle {

inline constexpr std::size_t kEnumerationCap = 22;

struct EnumerationResult {
  LossPmf pmf;                      // over the counted nodes
  std::vector<double> p;            // <l_i>
  std::vector<double> second;       // <l_i l_j>, n x n row-major, diagonal = p
  double log_z = 0.0;

  double pair(NodeId i, NodeId j) const { return second[i * p.size() + j]; }
  double correlation(NodeId i, NodeId j) const {
    const double c = pair(i, j) - p[i] * p[j];
    return c / (std::sqrt(p[i] * (1.0 - p[i])) * std::sqrt(p[j] * (1.0 - p[j])));
  }
};

/// Neighbour lists (j, beta_ij) for every node.
inline std::vector<std::vector<std::pair<NodeId, double>>> adjacency(const JungleParams& params) {
  std::vector<std::vector<std::pair<NodeId, double>>> adj(params.n());
  for (const auto& [e, b] : params.beta) {
    if (e.i >= e.j || e.j >= params.n()) {
      throw std::domain_error("coupling on malformed edge " + to_string(e));
    }
    if (!std::isfinite(b)) throw std::domain_error("coupling must be finite");
    adj[e.i].emplace_back(e.j, b);
    adj[e.j].emplace_back(e.i, b);
  }
  return adj;
}

/// Visits every state as (mask, energy) in Gray-code order, so each step
/// flips one node and the energy moves by that node's local field.
template <class Visit>
void for_each_state(const JungleParams& params,
                    const std::vector<std::vector<std::pair<NodeId, double>>>& adj,
                    Visit&& visit) {
  const std::uint64_t states = std::uint64_t{1} << params.n();
  std::uint32_t mask = 0;
  double energy = 0.0;
  visit(mask, energy);
  for (std::uint64_t k = 1; k < states; ++k) {
    const int bit = std::countr_zero(k);
    double field = params.alpha[bit];
    for (const auto& [j, b] : adj[bit]) {
      if (mask & (1u << j)) field += b;
    }
    mask ^= (1u << bit);
    energy += (mask & (1u << bit)) ? field : -field;
    visit(mask, energy);
  }
}

/// Exact loss pmf and first/second moments. Nodes listed in `uncounted`
/// take part in the distribution but are left out of the loss count.
inline EnumerationResult enumerate_exact(const JungleParams& params,
                                         std::span<const NodeId> uncounted = {}) {
  const std::size_t n = params.n();
  if (n > kEnumerationCap) {
    throw std::domain_error("enumerate_exact: n=" + std::to_string(n) +
                            " exceeds the enumeration cap of " +
                            std::to_string(kEnumerationCap));
  }
  if (n == 0) throw std::domain_error("enumerate_exact: empty model");
  for (double a : params.alpha) {
    if (!std::isfinite(a)) throw std::domain_error("field must be finite");
  }
  const auto adj = adjacency(params);

  std::uint32_t counted_mask = (1u << n) - 1u;
  for (NodeId u : uncounted) {
    if (u >= n) throw std::domain_error("uncounted node out of range");
    counted_mask &= ~(1u << u);
  }
  const std::size_t counted = static_cast<std::size_t>(std::popcount(counted_mask));
  auto walk = [&](auto&& visit) { for_each_state(params, adj, visit); };

  double e_max = -std::numeric_limits<double>::infinity();
  walk([&](std::uint32_t, double e) { e_max = std::max(e_max, e); });

  std::vector<double> by_count(counted + 1, 0.0);
  std::vector<double> first(n, 0.0);
  std::vector<double> second(n * n, 0.0);
  double z = 0.0;
  walk([&](std::uint32_t mask, double e) {
    const double w = std::exp(e - e_max);
    z += w;
    by_count[std::popcount(mask & counted_mask)] += w;
    for (std::uint32_t a = mask; a; a &= a - 1) {
      const int i = std::countr_zero(a);
      first[i] += w;
      for (std::uint32_t b = a & (a - 1); b; b &= b - 1) {
        second[i * n + std::countr_zero(b)] += w;
      }
    }
  });

  EnumerationResult r;
  std::vector<double> lw(counted + 1);
  for (std::size_t l = 0; l <= counted; ++l) {
    lw[l] = by_count[l] > 0.0 ? std::log(by_count[l]) + e_max
                              : -std::numeric_limits<double>::infinity();
  }
  r.pmf = LossPmf::from_log_weights(std::move(lw));
  r.log_z = std::log(z) + e_max;
  r.p.resize(n);
  r.second.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    r.p[i] = first[i] / z;
    r.second[i * n + i] = r.p[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = second[i * n + j] / z;
      r.second[i * n + j] = v;
      r.second[j * n + i] = v;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Parameter builders for the closed-form families

/// Pair (0, 1) coupled, every node sharing alpha.
inline JungleParams pair_contagion_params(std::size_t n, double alpha, double beta) {
  JungleParams jp;
  jp.alpha.assign(n, alpha);
  if (n >= 2) jp.beta[Edge{0, 1}] = beta;
  return jp;
}

/// Hub is node 0, peripherals 1..n.
inline JungleParams dandelion_params(std::size_t n, double alpha0, double alpha, double beta) {
  JungleParams jp;
  jp.alpha.assign(n + 1, alpha);
  jp.alpha[0] = alpha0;
  for (NodeId i = 1; i <= n; ++i) jp.beta[Edge{0, i}] = beta;
  return jp;
}

inline JungleParams diamond_params(std::size_t n, double alpha, double beta) {
  JungleParams jp;
  jp.alpha.assign(n, alpha);
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) jp.beta[Edge{i, j}] = beta;
  }
  return jp;
}

}  // namespace jungle
