#pragma once

// Command-line front end. Every subcommand is a thin wrapper over the library
// calls of the same name; primary data goes to --out (or standard output),
// diagnostics to standard error.
//
// Exit codes: 0 success, 1 invalid input, 2 numerical non-convergence.

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "jungle/calibration.hpp"
#include "jungle/core.hpp"
#include "jungle/dataio.hpp"
#include "jungle/ensemble.hpp"
#include "jungle/enumerate.hpp"
#include "jungle/exact_models.hpp"
#include "jungle/risk.hpp"
#include "jungle/sampler.hpp"

namespace jungle::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNoConvergence = 2;

/// Invalid flag combination or value detected after parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses "lo:hi:steps".
inline GridAxis parse_range(const std::string& text) {
  std::vector<std::string> parts;
  std::string cell;
  std::istringstream ss(text);
  while (std::getline(ss, cell, ':')) parts.push_back(cell);
  if (parts.size() != 3) throw UsageError("range '" + text + "' must have the form lo:hi:steps");
  GridAxis a;
  try {
    std::size_t used = 0;
    a.lo = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("lo");
    a.hi = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("hi");
    const long long steps = std::stoll(parts[2], &used);
    if (used != parts[2].size() || steps < 2) throw std::invalid_argument("steps");
    a.steps = static_cast<std::size_t>(steps);
  } catch (const std::exception&) {
    throw UsageError("range '" + text + "' must have the form lo:hi:steps with steps >= 2");
  }
  if (!(a.hi > a.lo)) throw UsageError("range '" + text + "' must be increasing");
  return a;
}

namespace detail {

/// Writes to the file named by `path`, or to `fallback` when it is empty.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw UsageError("cannot write " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

struct ModelFlags {
  std::size_t n = 0;
  std::optional<double> p, p0, rho, alpha, alpha0, beta;
  std::string config;

  void add(CLI::App* app) {
    app->add_option("--n", n, "Node count (peripheral count for the Dandelion)");
    app->add_option("--p", p, "Default probability");
    app->add_option("--p0", p0, "Hub default probability (Dandelion)");
    app->add_option("--rho", rho, "Default correlation");
    app->add_option("--alpha", alpha, "Field, instead of --p/--rho");
    app->add_option("--alpha0", alpha0, "Hub field (Dandelion)");
    app->add_option("--beta", beta, "Coupling, instead of --p/--rho");
    app->add_option("--config", config, "Portfolio spec document (JSON)");
  }

  bool by_params() const { return alpha.has_value() || beta.has_value() || alpha0.has_value(); }

  void need_n(std::size_t min) const {
    if (n < min) throw UsageError("--n must be at least " + std::to_string(min));
  }
  static double need(const std::optional<double>& v, const char* flag) {
    if (!v) throw UsageError(std::string(flag) + " is required");
    return *v;
  }
};

inline DandelionParams dandelion_from(const ModelFlags& f) {
  f.need_n(1);
  if (f.by_params()) {
    return {f.n, ModelFlags::need(f.alpha0, "--alpha0"), ModelFlags::need(f.alpha, "--alpha"),
            ModelFlags::need(f.beta, "--beta")};
  }
  const double p = ModelFlags::need(f.p, "--p");
  return calibrate_dandelion({f.n, p, f.p0.value_or(p), ModelFlags::need(f.rho, "--rho")}).params;
}

inline DiamondParams diamond_from(const ModelFlags& f, const DiamondSolveOptions& opt = {}) {
  f.need_n(2);
  if (f.by_params()) return {f.n, ModelFlags::need(f.alpha, "--alpha"), ModelFlags::need(f.beta, "--beta")};
  return calibrate_diamond({f.n, ModelFlags::need(f.p, "--p"), ModelFlags::need(f.rho, "--rho")}, opt).params;
}

inline PortfolioSpec spec_from(const ModelFlags& f, const std::string& model) {
  if (!f.config.empty()) return load_portfolio(f.config);
  if (model == "dandelion") {
    f.need_n(1);
    const double p = ModelFlags::need(f.p, "--p");
    return make_dandelion_spec(f.n, p, f.p0.value_or(p), ModelFlags::need(f.rho, "--rho"));
  }
  if (model == "diamond") {
    f.need_n(2);
    return make_diamond_spec(f.n, ModelFlags::need(f.p, "--p"), ModelFlags::need(f.rho, "--rho"));
  }
  if (model == "binomial") {
    f.need_n(1);
    return make_independent_spec(f.n, ModelFlags::need(f.p, "--p"));
  }
  throw UsageError("model '" + model + "' needs --config");
}

inline void require_valid(const PortfolioSpec& spec) {
  const ValidationReport v = validate_portfolio(spec);
  if (!v.ok()) throw UsageError("invalid portfolio: " + v.summary());
}

inline FitConfig fit_from(const std::string& mode, double tol, std::size_t max_iter, std::uint64_t seed) {
  FitConfig c;
  if (mode == "exact") {
    c.mode = FitMode::kExact;
  } else if (mode == "sampled") {
    c.mode = FitMode::kSampled;
  } else if (mode != "auto") {
    throw UsageError("--mode must be auto, exact or sampled");
  }
  c.tolerance = tol;
  c.max_iterations = max_iter;
  c.seed = seed;
  return c;
}

inline void print_risk(std::ostream& out, const RiskReport& r) {
  out << "confidence " << fmt9(r.confidence) << '\n'
      << "VaR " << fmt9(r.var) << '\n'
      << "ES " << fmt9(r.es) << '\n'
      << "modes " << r.peaks.size();
  for (const auto& p : r.peaks) out << ' ' << fmt9(p.fraction);
  out << '\n';
}

}  // namespace detail

/// Runs one command line; returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact and sampled loss distributions for maximum-entropy contagion models"};
  app.require_subcommand(1);
  std::function<void()> action;

  std::string out_path;
  std::uint64_t seed = 0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", out_path, "Output path (default: standard output)");
    sub->add_option("--seed", seed, "Random seed");
  };

  // solve -------------------------------------------------------------------
  auto* solve = app.add_subcommand("solve", "Exact loss pmf of a model");
  std::string solve_model;
  detail::ModelFlags solve_flags;
  std::optional<double> solve_risk;
  double peak_floor = 1e-6;
  solve->add_option("model", solve_model, "binomial | pair | dandelion | diamond | general")
      ->required()
      ->check(CLI::IsMember({"binomial", "pair", "dandelion", "diamond", "general"}));
  solve_flags.add(solve);
  solve->add_option("--risk", solve_risk, "Print VaR/ES/modes at this confidence (pmf then only goes to --out)");
  solve->add_option("--peak-floor", peak_floor, "Mass floor for mode detection");
  common(solve);
  solve->callback([&] {
    action = [&] {
      LossPmf pmf;
      if (solve_model == "binomial") {
        solve_flags.need_n(1);
        pmf = solve_flags.alpha ? binomial_pmf_from_field(solve_flags.n, *solve_flags.alpha)
                                : binomial_pmf(solve_flags.n, detail::ModelFlags::need(solve_flags.p, "--p"));
      } else if (solve_model == "pair") {
        solve_flags.need_n(2);
        pmf = pair_contagion_pmf(solve_flags.n, detail::ModelFlags::need(solve_flags.alpha, "--alpha"),
                                 detail::ModelFlags::need(solve_flags.beta, "--beta"));
      } else if (solve_model == "dandelion") {
        pmf = dandelion_pmf(detail::dandelion_from(solve_flags));
      } else if (solve_model == "diamond") {
        pmf = diamond_pmf(detail::diamond_from(solve_flags));
      } else {
        if (solve_flags.config.empty()) throw UsageError("general model needs --config");
        const PortfolioSpec spec = load_portfolio(solve_flags.config);
        detail::require_valid(spec);
        FitConfig fc;
        fc.mode = FitMode::kExact;
        pmf = enumerate_exact(calibrate_general(spec, fc).params).pmf;
      }
      if (solve_risk) {
        if (!out_path.empty()) {
          detail::Sink sink(out_path, out);
          write_pmf_csv(*sink, pmf);
        }
        detail::print_risk(out, risk_report(pmf, *solve_risk, peak_floor));
      } else {
        detail::Sink sink(out_path, out);
        write_pmf_csv(*sink, pmf);
      }
    };
  });

  // calibrate -----------------------------------------------------------------
  auto* calibrate = app.add_subcommand("calibrate", "Invert empirical inputs into model parameters");
  std::string cal_model;
  detail::ModelFlags cal_flags;
  double tol = -1.0;
  std::size_t max_iter = 0;
  std::string mode = "auto";
  calibrate->add_option("model", cal_model, "dandelion | diamond | general")
      ->required()
      ->check(CLI::IsMember({"dandelion", "diamond", "general"}));
  cal_flags.add(calibrate);
  calibrate->add_option("--tol", tol, "Convergence tolerance (default 1e-6 exact, 1e-3 sampled)");
  calibrate->add_option("--max-iter", max_iter, "Iteration cap");
  calibrate->add_option("--mode", mode, "auto | exact | sampled");
  common(calibrate);
  calibrate->callback([&] {
    action = [&] {
      json j;
      if (cal_model == "dandelion") {
        cal_flags.need_n(1);
        const double p = detail::ModelFlags::need(cal_flags.p, "--p");
        const auto r = calibrate_dandelion({cal_flags.n, p, cal_flags.p0.value_or(p),
                                            detail::ModelFlags::need(cal_flags.rho, "--rho")});
        j = {{"model", "dandelion"}, {"n", r.params.n}, {"alpha0", r.params.alpha0}, {"alpha", r.params.alpha},
             {"beta", r.params.beta}, {"residual", r.residual}};
      } else if (cal_model == "diamond") {
        cal_flags.need_n(2);
        DiamondSolveOptions opt;
        if (tol > 0.0) opt.tolerance = tol;
        if (max_iter) opt.max_iterations = max_iter;
        const auto r = calibrate_diamond({cal_flags.n, detail::ModelFlags::need(cal_flags.p, "--p"),
                                          detail::ModelFlags::need(cal_flags.rho, "--rho")},
                                         opt);
        j = {{"model", "diamond"}, {"n", r.params.n}, {"alpha", r.params.alpha}, {"beta", r.params.beta},
             {"residual", r.residual}, {"iterations", r.iterations}, {"multiple_roots", r.multiple_roots}};
        j["roots"] = json::array();
        for (const auto& x : r.roots) j["roots"].push_back({{"alpha", x.alpha}, {"beta", x.beta}});
      } else {
        if (cal_flags.config.empty()) throw UsageError("general model needs --config");
        const PortfolioSpec spec = load_portfolio(cal_flags.config);
        detail::require_valid(spec);
        const auto r = calibrate_general(spec, detail::fit_from(mode, tol, max_iter, seed));
        j = to_json(r.params);
        j["model"] = "general";
        j["residual"] = r.residual;
        j["iterations"] = r.iterations;
      }
      detail::Sink sink(out_path, out);
      *sink << j.dump(2) << '\n';
    };
  });

  // sample --------------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "Gibbs samples of default states and monetary losses");
  std::string sample_model;
  detail::ModelFlags sample_flags;
  std::string params_path;
  std::string states_path;
  std::string summary_path;
  double sample_conf = 0.999;
  McmcConfig mc;
  sample->add_option("model", sample_model, "dandelion | diamond | general | params")
      ->required()
      ->check(CLI::IsMember({"dandelion", "diamond", "general", "params"}));
  sample_flags.add(sample);
  sample->add_option("--params", params_path, "Model parameter document (JSON) for the params model");
  sample->add_option("--chains", mc.chains, "Independent chains");
  sample->add_option("--burn-in", mc.burn_in, "Sweeps discarded per chain");
  sample->add_option("--thin", mc.thin, "Sweeps between retained draws");
  sample->add_option("--draws", mc.draws, "Retained draws per chain");
  sample->add_option("--states", states_path, "Binary packed-bit state dump");
  sample->add_option("--summary", summary_path, "Diagnostics and loss summary (JSON)");
  sample->add_option("--confidence", sample_conf, "Quantile reported in the summary");
  common(sample);
  sample->callback([&] {
    action = [&] {
      mc.seed = seed;
      JungleParams params;
      std::optional<PortfolioSpec> spec;
      if (sample_model == "params") {
        if (params_path.empty()) throw UsageError("params model needs --params");
        params = load_params(params_path);
      } else if (sample_model == "dandelion" && sample_flags.config.empty()) {
        const DandelionParams d = detail::dandelion_from(sample_flags);
        params = dandelion_params(d.n, d.alpha0, d.alpha, d.beta);
        if (!sample_flags.by_params()) spec = detail::spec_from(sample_flags, "dandelion");
      } else if (sample_model == "diamond" && sample_flags.config.empty()) {
        const DiamondParams d = detail::diamond_from(sample_flags);
        params = diamond_params(d.n, d.alpha, d.beta);
        if (!sample_flags.by_params()) spec = detail::spec_from(sample_flags, "diamond");
      } else {
        spec = detail::spec_from(sample_flags, sample_model);
        detail::require_valid(*spec);
        FitConfig fc;
        fc.seed = seed;
        params = calibrate_general(*spec, fc).params;
      }
      SampleSet s = gibbs_sample(params, mc);
      std::optional<LossDistribution> dist;
      if (spec) {
        dist = losses_from_states(s, *spec);
        s.monetary_losses = dist->losses;
      }
      {
        detail::Sink sink(out_path, out);
        write_samples_csv(*sink, s);
      }
      if (!states_path.empty()) {
        std::ofstream bin(states_path, std::ios::binary);
        if (!bin) throw UsageError("cannot write " + states_path);
        write_states_binary(bin, s);
      }
      for (const auto& w : s.diagnostics.warnings) err << "warning: " << w << '\n';
      if (!summary_path.empty()) {
        json j;
        j["diagnostics"] = to_json(s.diagnostics);
        const LossPmf pmf = empirical_loss_pmf(s);
        j["loss_count"] = to_json(risk_report(pmf, sample_conf));
        if (dist) {
          j["monetary"] = {{"mean_loss", dist->mean_loss},
                           {"loss_standard_error", dist->loss_standard_error},
                           {"mean_lgd", dist->mean_lgd},
                           {"lgd_standard_error", dist->lgd_standard_error},
                           {"quantile", dist->quantile(sample_conf)},
                           {"confidence", sample_conf}};
        }
        detail::Sink sink(summary_path, out);
        *sink << j.dump(2) << '\n';
      }
    };
  });

  // risk ----------------------------------------------------------------------
  auto* risk = app.add_subcommand("risk", "VaR, ES and modes of a pmf file");
  std::string pmf_path;
  double confidence = 0.99;
  risk->add_option("--pmf", pmf_path, "pmf CSV (loss_count,loss_fraction,probability)")->required();
  risk->add_option("--confidence", confidence, "Confidence level");
  risk->add_option("--peak-floor", peak_floor, "Mass floor for mode detection");
  common(risk);
  risk->callback([&] {
    action = [&] {
      std::ifstream in(pmf_path);
      if (!in) throw ParseError("cannot open " + pmf_path);
      const LossPmf pmf = read_pmf_csv(in);
      detail::Sink sink(out_path, out);
      *sink << to_json(risk_report(pmf, confidence, peak_floor)).dump(2) << '\n';
    };
  });

  // scan ----------------------------------------------------------------------
  auto* scan = app.add_subcommand("scan", "Diamond phase scan or iso-probability transition search");
  std::string scan_kind;
  std::size_t scan_n = 0;
  std::string alpha_range = "-6:2:64";
  std::string beta_range = "0:0.2:64";
  std::string scan_summary;
  std::optional<double> scan_p;
  double beta_max = 0.0;
  std::size_t path_steps = 128;
  double scan_conf = 0.999;
  scan->add_option("kind", scan_kind, "diamond (grid scan) | transition (iso-p path)")
      ->required()
      ->check(CLI::IsMember({"diamond", "transition"}));
  scan->add_option("--n", scan_n, "Node count")->required();
  scan->add_option("--alpha", alpha_range, "Field axis lo:hi:steps");
  scan->add_option("--beta", beta_range, "Coupling axis lo:hi:steps");
  scan->add_option("--summary", scan_summary, "Transition line and critical point (JSON)");
  scan->add_option("--p", scan_p, "Default probability held fixed along the transition path");
  scan->add_option("--beta-max", beta_max, "Largest coupling on the transition path (default 16/n)");
  scan->add_option("--steps", path_steps, "Transition path steps");
  scan->add_option("--confidence", scan_conf, "VaR confidence on both sides of the transition");
  common(scan);
  scan->callback([&] {
    action = [&] {
      if (scan_n < 2) throw UsageError("--n must be at least 2");
      if (scan_kind == "diamond") {
        const PhaseGrid g = scan_phase(scan_n, parse_range(alpha_range), parse_range(beta_range));
        {
          detail::Sink sink(out_path, out);
          write_phase_csv(*sink, g);
        }
        const json summary = phase_summary(g);
        if (!scan_summary.empty()) {
          detail::Sink sink(scan_summary, out);
          *sink << summary.dump(2) << '\n';
        }
        if (g.critical_point) {
          err << "critical point alpha " << fmt9(g.critical_point->first) << " beta "
              << fmt9(g.critical_point->second) << '\n';
        }
      } else {
        const double p = detail::ModelFlags::need(scan_p, "--p");
        const TransitionCrossing t = find_transition(scan_n, p, beta_max, path_steps);
        const RiskReport below = var_es(diamond_pmf(t.below_params), scan_conf);
        const RiskReport above = var_es(diamond_pmf(t.above_params), scan_conf);
        json j;
        auto side = [&](const DiamondParams& d, const PathPoint& pt, const RiskReport& r) {
          return json{{"alpha", d.alpha}, {"beta", d.beta}, {"rho", pt.rho}, {"var", r.var}, {"es", r.es},
                      {"modes", detect_peaks(diamond_pmf(d)).size()}};
        };
        j["n"] = scan_n;
        j["p"] = p;
        j["confidence"] = scan_conf;
        j["peak_elasticity"] = t.path[t.peak].elasticity;
        j["peak_beta"] = t.path[t.peak].beta;
        j["below"] = side(t.below_params, t.path[t.below], below);
        j["above"] = side(t.above_params, t.path[t.above], above);
        if (below.var > 0.0) j["var_ratio"] = above.var / below.var;
        detail::Sink sink(out_path, out);
        *sink << j.dump(2) << '\n';
      }
    };
  });

  // ensemble ------------------------------------------------------------------
  auto* ensemble = app.add_subcommand("ensemble", "Model-risk ensemble over an uncertainty box");
  std::string ens_model;
  detail::ModelFlags ens_flags;
  UncertaintyBox box;
  EnsembleConfig ens_cfg;
  std::string csv_path;
  std::vector<std::string> stresses;
  ensemble->add_option("model", ens_model, "dandelion | diamond | general")
      ->required()
      ->check(CLI::IsMember({"dandelion", "diamond", "general"}));
  ens_flags.add(ensemble);
  ensemble->add_option("--dp", box.dp, "Half-width on default probabilities");
  ensemble->add_option("--drho", box.drho, "Half-width on correlations");
  ensemble->add_option("--samples", box.samples, "Samples including the centre");
  ensemble->add_flag("--corners", box.include_corners, "Also evaluate the box corners");
  ensemble->add_option("--confidence", ens_cfg.confidence, "VaR/ES confidence");
  ensemble->add_option("--threshold", ens_cfg.near_transition_threshold, "Near-transition ridge distance");
  ensemble->add_option("--csv", csv_path, "Per-sample CSV");
  ensemble->add_option("--stress", stresses,
                       "Stress scenario name:p_scale:p_shift:rho_shift (repeatable); replaces the random box");
  common(ensemble);
  ensemble->callback([&] {
    action = [&] {
      box.seed = seed;
      ens_cfg.fit.seed = seed;
      ens_cfg.mcmc.seed = seed;
      const PortfolioSpec spec = detail::spec_from(ens_flags, ens_model);
      detail::require_valid(spec);
      EnsembleReport rep;
      if (stresses.empty()) {
        rep = run_ensemble(spec, box, ens_cfg);
      } else {
        std::vector<StressScenario> sc;
        for (const auto& text : stresses) {
          std::vector<std::string> parts;
          std::string cell;
          std::istringstream ss(text);
          while (std::getline(ss, cell, ':')) parts.push_back(cell);
          if (parts.size() != 4) throw UsageError("--stress must be name:p_scale:p_shift:rho_shift");
          try {
            sc.push_back({parts[0], std::stod(parts[1]), std::stod(parts[2]), std::stod(parts[3])});
          } catch (const std::exception&) {
            throw UsageError("--stress values must be numbers: " + text);
          }
        }
        rep = run_scenarios(spec, sc, ens_cfg);
      }
      for (const auto& line : rep.log) err << "note: " << line << '\n';
      if (!csv_path.empty()) {
        detail::Sink sink(csv_path, out);
        write_ensemble_csv(*sink, rep);
      }
      detail::Sink sink(out_path, out);
      *sink << to_json(rep).dump(2) << '\n';
    };
  });

  // histogram -----------------------------------------------------------------
  auto* hist = app.add_subcommand("histogram", "Histogram of historical default rates, or a synthetic series");
  std::string input;
  std::string cohort;
  std::size_t bins = 20;
  std::string generate;
  hist->add_option("--input", input, "Default-rate CSV (year,cohort,rate[,count])");
  hist->add_option("--cohort", cohort, "Only records of this cohort");
  hist->add_option("--bins", bins, "Equal-width bins over [0, max rate]");
  hist->add_option("--generate", generate, "Emit a synthetic series instead: specgrade | caa-c")
      ->check(CLI::IsMember({"specgrade", "caa-c"}));
  common(hist);
  hist->callback([&] {
    action = [&] {
      if (!generate.empty()) {
        const FixtureSpec f = generate == "specgrade" ? speculative_grade_fixture(seed) : caa_c_fixture(seed);
        detail::Sink sink(out_path, out);
        write_series(*sink, synthetic_series(f));
        return;
      }
      if (input.empty()) throw UsageError("histogram needs --input or --generate");
      DefaultRateSeries series = load_series(input);
      if (!cohort.empty()) {
        std::erase_if(series, [&](const DefaultRateRecord& r) { return r.cohort != cohort; });
      }
      detail::Sink sink(out_path, out);
      write_histogram_csv(*sink, histogram(series, bins));
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }
  try {
    if (action) action();
    return kExitOk;
  } catch (const CalibrationError& e) {
    err << "error: " << e.what() << '\n';
    if (!e.is_domain_error() && std::isfinite(e.residual())) err << "best residual " << fmt9(e.residual()) << '\n';
    return e.is_domain_error() ? kExitInvalid : kExitNoConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace jungle::cli
