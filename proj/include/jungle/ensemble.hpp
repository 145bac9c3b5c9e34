#pragma once

// Model-risk ensembles: perturb the empirical inputs inside a box, calibrate
// every perturbed point, and classify the resulting loss distributions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "jungle/calibration.hpp"
#include "jungle/core.hpp"
#include "jungle/enumerate.hpp"
#include "jungle/exact_models.hpp"
#include "jungle/parallel.hpp"
#include "jungle/risk.hpp"
#include "jungle/sampler.hpp"

namespace jungle {

struct UncertaintyBox {
  double dp = 0.0;    // half-width on every p_i
  double drho = 0.0;  // half-width on every rho_ij
  std::size_t samples = 32;
  std::uint64_t seed = 0;
  std::size_t max_attempts = 100;
  bool include_corners = false;  // also evaluate the 2^k corners of the family box
};

enum class Regime { kUnimodal, kBimodal, kNearTransition };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::kUnimodal: return "unimodal";
    case Regime::kBimodal: return "bimodal";
    case Regime::kNearTransition: return "near-transition";
  }
  return "unknown";
}

enum class Family { kDandelion, kDiamond, kGeneral };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::kDandelion: return "dandelion";
    case Family::kDiamond: return "diamond";
    case Family::kGeneral: return "general";
  }
  return "unknown";
}

struct EnsembleConfig {
  double confidence = 0.99;
  double peak_floor = 1e-6;
  double near_transition_threshold = 0.05;  // normalized ridge distance
  // Diamond scan used for the ridge distance; empty axes pick defaults
  // around the centre point.
  std::optional<GridAxis> scan_alpha;
  std::optional<GridAxis> scan_beta;
  FitConfig fit;
  McmcConfig mcmc{};  // pmf estimation for general specs above the fit threshold
};

struct SampleOutcome {
  std::size_t index = 0;
  std::string origin;  // "centre", "corner", "random" or a scenario name
  std::vector<double> p;
  std::vector<double> rho;  // in edge order of the source spec
  bool ok = false;
  std::string error;
  std::vector<double> alpha;  // hub first for the Dandelion
  std::vector<double> beta;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool multiple_roots = false;
  Regime regime = Regime::kUnimodal;
  std::size_t modes = 0;
  double ridge_distance = std::numeric_limits<double>::infinity();
  bool near_ridge = false;  // within the threshold, whatever the mode count
  double var = 0.0;
  double es = 0.0;
  std::vector<double> pmf;

  bool operator==(const SampleOutcome&) const = default;
};

struct EnsembleReport {
  Family family = Family::kGeneral;
  double confidence = 0.0;
  std::vector<SampleOutcome> samples;
  std::vector<std::string> log;  // skipped points and other notes
  std::set<Regime> labels;
  double alpha_dispersion = 0.0;  // max over coordinates of the std-dev across samples
  double beta_dispersion = 0.0;
  double var_min = 0.0;
  double var_max = 0.0;
  bool any_systemic = false;
  std::optional<std::pair<double, double>> critical_point;

  bool operator==(const EnsembleReport&) const = default;
};

/// Recognizes hub-and-spoke and complete-graph specs with homogeneous inputs,
/// which have closed-form solvers.
inline Family classify_family(const PortfolioSpec& spec) {
  if (spec.n < 2 || spec.rho.empty()) return Family::kGeneral;
  const double r0 = spec.rho.begin()->second;
  for (const auto& [e, r] : spec.rho) {
    if (r != r0) return Family::kGeneral;
  }
  if (spec.hub) {
    const NodeId h = *spec.hub;
    bool star = spec.rho.size() == spec.n - 1;
    for (const auto& [e, r] : spec.rho) star = star && (e.i == h || e.j == h);
    std::optional<double> peripheral;
    for (NodeId i = 0; i < spec.n && star; ++i) {
      if (i == h) continue;
      if (peripheral && spec.p[i] != *peripheral) star = false;
      peripheral = spec.p[i];
    }
    if (star && h == 0) return Family::kDandelion;
  }
  if (spec.rho.size() == spec.n * (spec.n - 1) / 2 &&
      std::all_of(spec.p.begin(), spec.p.end(), [&](double x) { return x == spec.p[0]; })) {
    return Family::kDiamond;
  }
  return Family::kGeneral;
}

// ---------------------------------------------------------------------------
// Stress scenarios

/// A one-shot re-pricing of the inputs: p_i -> p_i * p_scale + p_shift and
/// rho_ij -> rho_ij + rho_shift.
struct StressScenario {
  std::string name = "stress";
  double p_scale = 1.0;
  double p_shift = 0.0;
  double rho_shift = 0.0;
};

inline PortfolioSpec apply_stress(const PortfolioSpec& spec, const StressScenario& s) {
  PortfolioSpec out = spec;
  for (double& x : out.p) x = x * s.p_scale + s.p_shift;
  for (auto& [e, r] : out.rho) r += s.rho_shift;
  return out;
}

/// Two-state mixture: the good distribution for a fraction 1 - w of the time
/// and the bad one for a fraction w.
inline LossPmf mixture_pmf(const LossPmf& good, const LossPmf& bad, double w) {
  if (good.n() != bad.n()) throw std::domain_error("mixture_pmf: support sizes differ");
  if (!(w >= 0.0 && w <= 1.0)) throw std::domain_error("mixture_pmf: weight must lie in [0,1]");
  std::vector<double> m(good.n() + 1);
  for (std::size_t l = 0; l <= good.n(); ++l) m[l] = (1.0 - w) * good[l] + w * bad[l];
  return LossPmf::from_probabilities(m);
}

namespace detail {

struct EnsembleContext {
  Family family;
  const PortfolioSpec* centre;
  const EnsembleConfig* config;
  std::optional<PhaseGrid> grid;
};

inline std::vector<double> edge_values(const PortfolioSpec& spec) {
  std::vector<double> v;
  v.reserve(spec.rho.size());
  for (const auto& [e, r] : spec.rho) v.push_back(r);
  return v;
}

inline void classify(SampleOutcome& o, const LossPmf& pmf, const EnsembleContext& ctx,
                     std::optional<DiamondParams> diamond) {
  const EnsembleConfig& cfg = *ctx.config;
  const RiskReport r = risk_report(pmf, cfg.confidence, cfg.peak_floor);
  o.var = r.var;
  o.es = r.es;
  o.modes = r.peaks.size();
  o.pmf = pmf.mass();
  if (diamond && ctx.grid) o.ridge_distance = ctx.grid->ridge_distance(diamond->alpha, diamond->beta);
  o.near_ridge = o.ridge_distance < cfg.near_transition_threshold;
  if (o.modes >= 2) {
    o.regime = Regime::kBimodal;
  } else if (o.near_ridge) {
    o.regime = Regime::kNearTransition;
  } else {
    o.regime = Regime::kUnimodal;
  }
}

/// Calibrates one perturbed spec and fills in its outcome; failures are
/// recorded, never thrown.
inline void evaluate(SampleOutcome& o, const PortfolioSpec& spec, const EnsembleContext& ctx) {
  o.p = spec.p;
  o.rho = edge_values(spec);
  try {
    switch (ctx.family) {
      case Family::kDandelion: {
        const NodeId h = *spec.hub;
        const DandelionEmpirical emp{spec.n - 1, spec.p[h == 0 ? 1 : 0], spec.p[h], spec.rho.begin()->second};
        const auto c = calibrate_dandelion(emp);
        o.alpha = {c.params.alpha0, c.params.alpha};
        o.beta = {c.params.beta};
        o.residual = c.residual;
        classify(o, dandelion_pmf(c.params), ctx, std::nullopt);
        break;
      }
      case Family::kDiamond: {
        const auto c = calibrate_diamond({spec.n, spec.p[0], spec.rho.begin()->second});
        o.alpha = {c.params.alpha};
        o.beta = {c.params.beta};
        o.residual = c.residual;
        o.iterations = c.iterations;
        o.multiple_roots = c.multiple_roots;
        classify(o, diamond_pmf(c.params), ctx, c.params);
        break;
      }
      case Family::kGeneral: {
        const auto c = calibrate_general(spec, ctx.config->fit);
        o.alpha = c.params.alpha;
        o.beta.clear();
        for (const auto& [e, b] : c.params.beta) o.beta.push_back(b);
        o.residual = c.residual;
        o.iterations = c.iterations;
        if (spec.n <= std::min(ctx.config->fit.enumeration_threshold, kEnumerationCap)) {
          classify(o, enumerate_exact(c.params).pmf, ctx, std::nullopt);
        } else {
          classify(o, empirical_loss_pmf(gibbs_sample(c.params, ctx.config->mcmc)), ctx, std::nullopt);
        }
        break;
      }
    }
    o.ok = true;
  } catch (const std::exception& ex) {
    o.ok = false;
    o.error = ex.what();
  }
}

/// Family-level perturbation coordinates: (p, p0, rho) for the Dandelion,
/// (p, rho) for the Diamond, every p_i and rho_ij otherwise.
inline PortfolioSpec perturb(const PortfolioSpec& centre, Family family, const UncertaintyBox& box,
                             const std::vector<double>& u) {
  PortfolioSpec s = centre;
  std::size_t k = 0;
  switch (family) {
    case Family::kDandelion: {
      const NodeId h = *centre.hub;
      const double dp_peripheral = box.dp * u[k++];
      const double dp_hub = box.dp * u[k++];
      for (NodeId i = 0; i < s.n; ++i) s.p[i] += (i == h) ? dp_hub : dp_peripheral;
      const double dr = box.drho * u[k++];
      for (auto& [e, r] : s.rho) r += dr;
      break;
    }
    case Family::kDiamond: {
      const double dp = box.dp * u[k++];
      for (double& x : s.p) x += dp;
      const double dr = box.drho * u[k++];
      for (auto& [e, r] : s.rho) r += dr;
      break;
    }
    case Family::kGeneral:
      for (double& x : s.p) x += box.dp * u[k++];
      for (auto& [e, r] : s.rho) r += box.drho * u[k++];
      break;
  }
  return s;
}

inline std::size_t perturbation_dim(const PortfolioSpec& spec, Family family) {
  switch (family) {
    case Family::kDandelion: return 3;
    case Family::kDiamond: return 2;
    case Family::kGeneral: return spec.n + spec.rho.size();
  }
  return 0;
}

inline std::optional<PhaseGrid> ensemble_grid(const PortfolioSpec& spec, Family family,
                                              const EnsembleConfig& cfg) {
  if (family != Family::kDiamond) return std::nullopt;
  const double nn = static_cast<double>(spec.n);
  const GridAxis a = cfg.scan_alpha.value_or(GridAxis{logit(spec.p[0]) - 4.0, 2.0, 48});
  const GridAxis b = cfg.scan_beta.value_or(GridAxis{0.0, 16.0 / nn, 48});
  return scan_phase(spec.n, a, b);
}

inline void summarize(EnsembleReport& rep) {
  std::vector<const SampleOutcome*> good;
  for (const auto& o : rep.samples) {
    if (o.ok) good.push_back(&o);
  }
  rep.labels.clear();
  // A bimodal sample close to the ridge is also near the transition, so the
  // label set collects every label a sample qualifies for.
  for (const auto* o : good) {
    rep.labels.insert(o->regime);
    if (o->near_ridge) rep.labels.insert(Regime::kNearTransition);
  }
  rep.any_systemic = rep.labels.count(Regime::kBimodal) || rep.labels.count(Regime::kNearTransition);
  auto dispersion = [&](auto field) {
    double worst = 0.0;
    if (good.size() < 2) return worst;
    const std::size_t dim = ((*good.front()).*field).size();
    for (std::size_t c = 0; c < dim; ++c) {
      // Offsets from the first sample keep identical samples at exactly zero.
      const double ref = ((*good.front()).*field)[c];
      double mean = 0.0;
      for (const auto* o : good) mean += (o->*field)[c] - ref;
      mean /= static_cast<double>(good.size());
      double ss = 0.0;
      for (const auto* o : good) ss += ((o->*field)[c] - ref - mean) * ((o->*field)[c] - ref - mean);
      worst = std::max(worst, std::sqrt(ss / static_cast<double>(good.size())));
    }
    return worst;
  };
  rep.alpha_dispersion = dispersion(&SampleOutcome::alpha);
  rep.beta_dispersion = dispersion(&SampleOutcome::beta);
  if (!good.empty()) {
    rep.var_min = rep.var_max = good.front()->var;
    for (const auto* o : good) {
      rep.var_min = std::min(rep.var_min, o->var);
      rep.var_max = std::max(rep.var_max, o->var);
    }
  }
}

inline EnsembleReport evaluate_all(const PortfolioSpec& centre, Family family,
                                   const std::vector<std::pair<std::string, PortfolioSpec>>& points,
                                   const EnsembleConfig& cfg, std::vector<std::string> log) {
  EnsembleContext ctx{family, &centre, &cfg, ensemble_grid(centre, family, cfg)};
  EnsembleReport rep;
  rep.family = family;
  rep.confidence = cfg.confidence;
  rep.log = std::move(log);
  if (ctx.grid) rep.critical_point = ctx.grid->critical_point;
  rep.samples.resize(points.size());
  parallel_for(points.size(), [&](std::size_t k) {
    rep.samples[k].index = k;
    rep.samples[k].origin = points[k].first;
    evaluate(rep.samples[k], points[k].second, ctx);
  });
  for (const auto& o : rep.samples) {
    if (!o.ok) rep.log.push_back("sample " + std::to_string(o.index) + " failed: " + o.error);
  }
  summarize(rep);
  return rep;
}

}  // namespace detail

/// Sample 0 is always the unperturbed centre; the remaining samples are drawn
/// uniformly from the box, each from its own seed stream, so a run with more
/// samples extends a smaller one. Infeasible draws are redrawn up to
/// max_attempts times and then skipped with a log entry.
inline EnsembleReport run_ensemble(const PortfolioSpec& spec, const UncertaintyBox& box,
                                   const EnsembleConfig& config = {}) {
  const ValidationReport v = validate_portfolio(spec);
  if (!v.ok()) throw std::invalid_argument("run_ensemble: " + v.summary());
  if (box.dp < 0.0 || box.drho < 0.0) throw std::invalid_argument("run_ensemble: negative box width");
  if (box.samples < 1) throw std::invalid_argument("run_ensemble: need at least one sample");

  const Family family = classify_family(spec);
  const std::size_t dim = detail::perturbation_dim(spec, family);
  std::vector<std::pair<std::string, PortfolioSpec>> points;
  std::vector<std::string> log;
  points.emplace_back("centre", spec);

  if (box.include_corners && dim <= 12) {
    for (std::uint64_t c = 0; c < (std::uint64_t{1} << dim); ++c) {
      std::vector<double> u(dim);
      for (std::size_t d = 0; d < dim; ++d) u[d] = ((c >> d) & 1u) ? 1.0 : -1.0;
      PortfolioSpec s = detail::perturb(spec, family, box, u);
      if (validate_portfolio(s).ok()) {
        points.emplace_back("corner", std::move(s));
      } else {
        log.push_back("corner " + std::to_string(c) + " infeasible, skipped");
      }
    }
  }

  for (std::size_t k = 1; k < box.samples; ++k) {
    std::mt19937_64 rng(detail::splitmix64(box.seed ^ detail::splitmix64(k)));
    bool placed = false;
    for (std::size_t attempt = 0; attempt < box.max_attempts && !placed; ++attempt) {
      std::vector<double> u(dim);
      for (double& x : u) x = 2.0 * detail::unit_uniform(rng) - 1.0;
      PortfolioSpec s = detail::perturb(spec, family, box, u);
      if (validate_portfolio(s).ok()) {
        points.emplace_back("random", std::move(s));
        placed = true;
      }
    }
    if (!placed) {
      log.push_back("sample " + std::to_string(k) + " skipped after " +
                    std::to_string(box.max_attempts) + " infeasible draws");
    }
  }
  return detail::evaluate_all(spec, family, points, config, std::move(log));
}

/// Evaluates user-supplied stress scenarios, one outcome per scenario. Each
/// outcome is computed as a one-sample ensemble centred at the stressed point.
inline EnsembleReport run_scenarios(const PortfolioSpec& spec, const std::vector<StressScenario>& scenarios,
                                    const EnsembleConfig& config = {}) {
  EnsembleReport rep;
  rep.family = classify_family(spec);
  rep.confidence = config.confidence;
  UncertaintyBox single;
  single.samples = 1;
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    SampleOutcome o;
    const PortfolioSpec stressed = apply_stress(spec, scenarios[k]);
    try {
      EnsembleReport one = run_ensemble(stressed, single, config);
      o = one.samples.front();
      if (!rep.critical_point) rep.critical_point = one.critical_point;
    } catch (const std::exception& ex) {
      o.p = stressed.p;
      o.rho = detail::edge_values(stressed);
      o.error = ex.what();
      rep.log.push_back("scenario " + scenarios[k].name + " failed: " + o.error);
    }
    o.index = k;
    o.origin = scenarios[k].name;
    rep.samples.push_back(std::move(o));
  }
  detail::summarize(rep);
  return rep;
}

}  // namespace jungle
