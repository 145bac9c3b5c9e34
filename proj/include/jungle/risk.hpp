#pragma once

// Tail measures on loss-count distributions, mode detection, and scans of the
// Diamond (alpha, beta) plane for the steep ridge where (p, rho) jump.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jungle/calibration.hpp"
#include "jungle/core.hpp"
#include "jungle/exact_models.hpp"
#include "jungle/parallel.hpp"

namespace jungle {

struct Peak {
  std::size_t location = 0;  // loss count at the mode (plateau midpoint)
  double fraction = 0.0;     // location / n
  double mass = 0.0;         // pmf mass within +-2 bins
  double prominence = 0.0;   // height above the higher of the two flanking minima
};

struct RiskReport {
  double confidence = 0.0;
  double var = 0.0;  // loss fraction
  double es = 0.0;   // loss fraction
  std::size_t var_count = 0;
  std::vector<Peak> peaks;
};

/// Discrete VaR (smallest loss count whose CDF reaches the confidence) and ES
/// as the tail mean including the VaR atom, both as fractions of n.
inline RiskReport var_es(const LossPmf& pmf, double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::domain_error("confidence must lie strictly inside (0,1)");
  }
  const auto& m = pmf.mass();
  const std::size_t n = pmf.n();
  std::size_t k = n;
  double cdf = 0.0;
  for (std::size_t l = 0; l <= n; ++l) {
    cdf += m[l];
    if (cdf >= confidence - 1e-12) {
      k = l;
      break;
    }
  }
  double tail = 0.0;
  double weighted = 0.0;
  for (std::size_t l = k; l <= n; ++l) {
    tail += m[l];
    weighted += m[l] * static_cast<double>(l);
  }
  RiskReport r;
  r.confidence = confidence;
  r.var_count = k;
  const double denom = n ? static_cast<double>(n) : 1.0;
  r.var = static_cast<double>(k) / denom;
  r.es = tail > 0.0 ? weighted / tail / denom : r.var;
  r.es = std::max(r.es, r.var);
  return r;
}

/// Local maxima after merging plateaus; a mode counts only if the mass within
/// two bins of it exceeds the floor.
inline std::vector<Peak> detect_peaks(const LossPmf& pmf, double floor = 1e-6) {
  const auto& m = pmf.mass();
  const std::size_t size = m.size();
  // Run-length compress equal neighbours into plateaus.
  struct Run {
    std::size_t begin, end;
    double value;
  };
  std::vector<Run> runs;
  for (std::size_t l = 0; l < size; ++l) {
    if (!runs.empty() && m[l] == runs.back().value) {
      runs.back().end = l;
    } else {
      runs.push_back({l, l, m[l]});
    }
  }
  std::vector<Peak> peaks;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const bool left_ok = r == 0 || runs[r - 1].value < runs[r].value;
    const bool right_ok = r + 1 == runs.size() || runs[r + 1].value < runs[r].value;
    if (!left_ok || !right_ok) continue;
    const std::size_t loc = (runs[r].begin + runs[r].end) / 2;
    double mass = 0.0;
    const std::size_t lo = runs[r].begin >= 2 ? runs[r].begin - 2 : 0;
    const std::size_t hi = std::min(size - 1, runs[r].end + 2);
    for (std::size_t l = lo; l <= hi; ++l) mass += m[l];
    if (!(mass > floor)) continue;
    // Prominence: walk outward until a higher run, tracking the minimum.
    double left_min = runs[r].value;
    for (std::size_t s = r; s-- > 0;) {
      if (runs[s].value > runs[r].value) break;
      left_min = std::min(left_min, runs[s].value);
    }
    double right_min = runs[r].value;
    for (std::size_t s = r + 1; s < runs.size(); ++s) {
      if (runs[s].value > runs[r].value) break;
      right_min = std::min(right_min, runs[s].value);
    }
    Peak p;
    p.location = loc;
    p.fraction = pmf.n() ? static_cast<double>(loc) / static_cast<double>(pmf.n()) : 0.0;
    p.mass = mass;
    p.prominence = runs[r].value - std::max(left_min, right_min);
    if (r == 0) p.prominence = runs[r].value - right_min;
    if (r + 1 == runs.size()) p.prominence = runs[r].value - left_min;
    if (runs.size() == 1) p.prominence = runs[r].value;
    peaks.push_back(p);
  }
  return peaks;
}

inline RiskReport risk_report(const LossPmf& pmf, double confidence, double peak_floor = 1e-6) {
  RiskReport r = var_es(pmf, confidence);
  r.peaks = detect_peaks(pmf, peak_floor);
  return r;
}

// ---------------------------------------------------------------------------
// Phase scan

struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t steps = 16;

  std::vector<double> values() const {
    std::vector<double> v(steps);
    for (std::size_t k = 0; k < steps; ++k) {
      v[k] = steps == 1 ? lo
                        : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1);
    }
    return v;
  }
};

struct RidgePoint {
  double alpha = 0.0;
  double beta = 0.0;
  double grad_norm = 0.0;
  std::size_t alpha_index = 0;
  std::size_t beta_index = 0;
};

struct PhaseGrid {
  std::size_t n = 0;
  std::vector<double> alpha_axis;
  std::vector<double> beta_axis;
  // Row-major over (alpha index, beta index).
  std::vector<double> p;
  std::vector<double> rho;
  std::vector<double> grad_norm;
  std::vector<char> on_ridge;
  std::vector<RidgePoint> ridge;            // strongest ridge point per alpha row
  std::vector<RidgePoint> transition_line;  // ridge points at or above half the peak
  std::optional<std::pair<double, double>> critical_point;

  std::size_t index(std::size_t i, std::size_t j) const { return i * beta_axis.size() + j; }

  /// Distance to the transition line with both axes scaled to [0, 1].
  double ridge_distance(double alpha, double beta) const {
    if (transition_line.empty()) return std::numeric_limits<double>::infinity();
    const double sa = alpha_axis.back() - alpha_axis.front();
    const double sb = beta_axis.back() - beta_axis.front();
    auto norm = [&](double a, double b) {
      return std::pair{(a - alpha_axis.front()) / sa, (b - beta_axis.front()) / sb};
    };
    const auto [x, y] = norm(alpha, beta);
    double best = std::numeric_limits<double>::infinity();
    auto seg = [&](std::pair<double, double> a, std::pair<double, double> b) {
      const double dx = b.first - a.first;
      const double dy = b.second - a.second;
      const double len2 = dx * dx + dy * dy;
      double t = len2 > 0.0 ? ((x - a.first) * dx + (y - a.second) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      return std::hypot(x - a.first - t * dx, y - a.second - t * dy);
    };
    for (std::size_t k = 0; k < transition_line.size(); ++k) {
      const auto a = norm(transition_line[k].alpha, transition_line[k].beta);
      const auto b = k + 1 < transition_line.size()
                         ? norm(transition_line[k + 1].alpha, transition_line[k + 1].beta)
                         : a;
      best = std::min(best, seg(a, b));
    }
    return best;
  }
};

namespace detail {

/// Central differences in the interior, one-sided at the ends; unit spacing.
inline double index_derivative(const std::vector<double>& f, std::size_t k, std::size_t stride,
                               std::size_t pos, std::size_t len) {
  if (len < 2) return 0.0;
  if (pos == 0) return f[k + stride] - f[k];
  if (pos + 1 == len) return f[k] - f[k - stride];
  return 0.5 * (f[k + stride] - f[k - stride]);
}

}  // namespace detail

/// Forward-maps every grid cell to (p, rho), takes the gradient magnitude of
/// both surfaces in index units, and traces the ridge by keeping, per alpha
/// row, the strongest interior local maximum along beta. The critical point is
/// where the ridge, followed from its peak toward larger alpha, falls below
/// half the peak (linearly interpolated between rows).
inline PhaseGrid scan_phase(std::size_t n, const GridAxis& alpha_axis, const GridAxis& beta_axis) {
  if (alpha_axis.steps < 16 || beta_axis.steps < 16) {
    throw std::domain_error("scan_phase: resolution must be at least 16 per axis");
  }
  if (!(alpha_axis.hi > alpha_axis.lo) || !(beta_axis.hi > beta_axis.lo)) {
    throw std::domain_error("scan_phase: axis ranges must be increasing");
  }
  if (n < 2) throw std::domain_error("scan_phase: n must be >= 2");
  PhaseGrid g;
  g.n = n;
  g.alpha_axis = alpha_axis.values();
  g.beta_axis = beta_axis.values();
  const std::size_t ra = g.alpha_axis.size();
  const std::size_t rb = g.beta_axis.size();
  g.p.assign(ra * rb, 0.0);
  g.rho.assign(ra * rb, 0.0);
  parallel_for(ra * rb, [&](std::size_t k) {
    const auto m = diamond_moments({n, g.alpha_axis[k / rb], g.beta_axis[k % rb]});
    g.p[k] = m.p;
    g.rho[k] = m.rho;
  });

  g.grad_norm.assign(ra * rb, 0.0);
  g.on_ridge.assign(ra * rb, 0);
  for (std::size_t i = 0; i < ra; ++i) {
    for (std::size_t j = 0; j < rb; ++j) {
      const std::size_t k = g.index(i, j);
      const double pa = detail::index_derivative(g.p, k, rb, i, ra);
      const double pb = detail::index_derivative(g.p, k, 1, j, rb);
      const double qa = detail::index_derivative(g.rho, k, rb, i, ra);
      const double qb = detail::index_derivative(g.rho, k, 1, j, rb);
      g.grad_norm[k] = std::sqrt(pa * pa + pb * pb + qa * qa + qb * qb);
    }
  }

  // Edge rows and columns carry one-sided differences; keep them off the ridge.
  for (std::size_t i = 1; i + 1 < ra; ++i) {
    std::optional<std::size_t> best;
    for (std::size_t j = 1; j + 1 < rb; ++j) {
      const double c = g.grad_norm[g.index(i, j)];
      if (c > g.grad_norm[g.index(i, j - 1)] && c >= g.grad_norm[g.index(i, j + 1)]) {
        if (!best || c > g.grad_norm[g.index(i, *best)]) best = j;
      }
    }
    if (best) {
      g.on_ridge[g.index(i, *best)] = 1;
      g.ridge.push_back({g.alpha_axis[i], g.beta_axis[*best], g.grad_norm[g.index(i, *best)], i, *best});
    }
  }
  if (g.ridge.empty()) return g;

  std::size_t top = 0;
  for (std::size_t k = 1; k < g.ridge.size(); ++k) {
    if (g.ridge[k].grad_norm > g.ridge[top].grad_norm) top = k;
  }
  const double half = 0.5 * g.ridge[top].grad_norm;
  std::size_t first = top;
  while (first > 0 && g.ridge[first - 1].grad_norm >= half &&
         g.ridge[first - 1].alpha_index + 1 == g.ridge[first].alpha_index) {
    --first;
  }
  std::size_t last = top;
  while (last + 1 < g.ridge.size() && g.ridge[last + 1].grad_norm >= half &&
         g.ridge[last + 1].alpha_index == g.ridge[last].alpha_index + 1) {
    ++last;
  }
  g.transition_line.assign(g.ridge.begin() + static_cast<std::ptrdiff_t>(first),
                           g.ridge.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  const RidgePoint& in = g.ridge[last];
  if (last + 1 < g.ridge.size() && g.ridge[last + 1].alpha_index == in.alpha_index + 1) {
    const RidgePoint& out = g.ridge[last + 1];
    const double t = (in.grad_norm - half) / (in.grad_norm - out.grad_norm);
    g.critical_point = std::pair{in.alpha + t * (out.alpha - in.alpha), in.beta + t * (out.beta - in.beta)};
  } else {
    g.critical_point = std::pair{in.alpha, in.beta};
  }
  return g;
}

// ---------------------------------------------------------------------------
// Iso-probability path through the transition

struct PathPoint {
  double beta = 0.0;
  double alpha = 0.0;
  double rho = 0.0;
  double elasticity = 0.0;  // d ln rho / d ln beta
};

struct TransitionCrossing {
  std::vector<PathPoint> path;
  std::size_t peak = 0;   // index of the largest elasticity
  std::size_t below = 0;  // last point before the half-peak band
  std::size_t above = 0;  // first point after it
  DiamondParams below_params;
  DiamondParams above_params;
};

namespace detail {

/// Derivative of f with respect to a non-uniform coordinate x: second-order
/// interior stencil, first-order at the ends.
inline std::vector<double> nonuniform_gradient(const std::vector<double>& f, const std::vector<double>& x) {
  const std::size_t m = f.size();
  std::vector<double> d(m, 0.0);
  if (m < 2) return d;
  d[0] = (f[1] - f[0]) / (x[1] - x[0]);
  d[m - 1] = (f[m - 1] - f[m - 2]) / (x[m - 1] - x[m - 2]);
  for (std::size_t k = 1; k + 1 < m; ++k) {
    const double hs = x[k] - x[k - 1];
    const double hd = x[k + 1] - x[k];
    d[k] = (hs * hs * f[k + 1] + (hd * hd - hs * hs) * f[k] - hd * hd * f[k - 1]) /
           (hs * hd * (hd + hs));
  }
  return d;
}

}  // namespace detail

/// Follows beta upward at fixed p (alpha re-solved at each step) and locates
/// the quasi-transition as the band where the elasticity of rho in beta stays
/// above half its peak. `beta_max` <= 0 selects 16/n.
inline TransitionCrossing find_transition(std::size_t n, double p, double beta_max = 0.0,
                                          std::size_t steps = 128) {
  if (n < 2) throw std::domain_error("find_transition: n must be >= 2");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("find_transition: p must lie in (0,1)");
  if (steps < 8) throw std::domain_error("find_transition: need at least 8 path steps");
  if (!(beta_max > 0.0)) beta_max = 16.0 / static_cast<double>(n);
  TransitionCrossing t;
  t.path.resize(steps);
  parallel_for(steps, [&](std::size_t k) {
    PathPoint& pt = t.path[k];
    pt.beta = beta_max * static_cast<double>(k + 1) / static_cast<double>(steps);
    pt.alpha = detail::diamond_field_for_probability(n, pt.beta, p);
    pt.rho = diamond_moments({n, pt.alpha, pt.beta}).rho;
  });
  std::vector<double> lr(steps);
  std::vector<double> lb(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    lr[k] = std::log(std::max(t.path[k].rho, std::numeric_limits<double>::min()));
    lb[k] = std::log(t.path[k].beta);
  }
  const auto e = detail::nonuniform_gradient(lr, lb);
  for (std::size_t k = 0; k < steps; ++k) t.path[k].elasticity = e[k];
  t.peak = static_cast<std::size_t>(std::max_element(e.begin(), e.end()) - e.begin());
  const double half = 0.5 * e[t.peak];
  t.below = t.peak;
  while (t.below > 0 && e[t.below] >= half) --t.below;
  t.above = t.peak;
  while (t.above + 1 < steps && e[t.above] >= half) ++t.above;
  t.below_params = {n, t.path[t.below].alpha, t.path[t.below].beta};
  t.above_params = {n, t.path[t.above].alpha, t.path[t.above].beta};
  return t;
}

}  // namespace jungle
