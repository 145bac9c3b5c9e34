#pragma once

// File formats: default-rate series, portfolio specs, model parameters, and
// every CSV/JSON output the tools emit. Numbers are written with 9
// significant digits.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "jungle/calibration.hpp"
#include "jungle/core.hpp"
#include "jungle/ensemble.hpp"
#include "jungle/exact_models.hpp"
#include "jungle/risk.hpp"
#include "jungle/sampler.hpp"

namespace jungle {

using json = nlohmann::json;

/// Malformed input; `line` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline std::string fmt9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

namespace detail {

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw ParseError("cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& s, const char* what, std::size_t line) {
  std::size_t used = 0;
  T v{};
  try {
    if constexpr (std::is_same_v<T, double>) {
      v = std::stod(s, &used);
    } else {
      const long long x = std::stoll(s, &used);
      v = static_cast<T>(x);
    }
  } catch (const std::exception&) {
    throw ParseError(std::string("cannot parse ") + what + " '" + s + "'", line);
  }
  if (used != s.size()) throw ParseError(std::string("trailing characters in ") + what + " '" + s + "'", line);
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Historical default-rate series

struct DefaultRateRecord {
  int year = 0;
  std::string cohort;
  double rate = 0.0;
  std::optional<long long> count;  // issuers in the cohort that year

  bool operator==(const DefaultRateRecord&) const = default;
};

using DefaultRateSeries = std::vector<DefaultRateRecord>;

/// CSV with header year,cohort,rate[,count] (any column order). Rows with a
/// rate outside [0,1], missing cells, or a year not after the cohort's
/// previous year are rejected with their line number.
inline DefaultRateSeries parse_series(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> col;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto head = detail::split_csv(line);
    for (std::size_t k = 0; k < head.size(); ++k) col[head[k]] = k;
    break;
  }
  for (const char* need : {"year", "cohort", "rate"}) {
    if (!col.count(need)) throw ParseError(std::string("missing column '") + need + "'", lineno ? lineno : 1);
  }
  const std::optional<std::size_t> count_col =
      col.count("count") ? std::optional<std::size_t>(col["count"]) : std::nullopt;
  std::size_t width = 0;
  for (const auto& [k, v] : col) width = std::max(width, v + 1);

  DefaultRateSeries out;
  std::map<std::string, int> last_year;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() < width - (count_col && *count_col + 1 == width ? 1 : 0)) {
      throw ParseError("expected " + std::to_string(width) + " columns, found " + std::to_string(cells.size()), lineno);
    }
    DefaultRateRecord r;
    r.year = detail::parse_number<int>(cells[col["year"]], "year", lineno);
    r.cohort = cells[col["cohort"]];
    if (r.cohort.empty()) throw ParseError("empty cohort", lineno);
    r.rate = detail::parse_number<double>(cells[col["rate"]], "rate", lineno);
    if (!(r.rate >= 0.0 && r.rate <= 1.0)) {
      throw ParseError("rate " + cells[col["rate"]] + " out of range [0,1]", lineno);
    }
    if (count_col && *count_col < cells.size() && !cells[*count_col].empty()) {
      r.count = detail::parse_number<long long>(cells[*count_col], "count", lineno);
      if (*r.count < 0) throw ParseError("negative issuer count", lineno);
    }
    auto it = last_year.find(r.cohort);
    if (it != last_year.end() && r.year <= it->second) {
      throw ParseError("year " + std::to_string(r.year) + " not after " + std::to_string(it->second) +
                           " in cohort " + r.cohort,
                       lineno);
    }
    last_year[r.cohort] = r.year;
    out.push_back(std::move(r));
  }
  return out;
}

inline DefaultRateSeries load_series(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_series(in);
}

inline void write_series(std::ostream& out, const DefaultRateSeries& series) {
  const bool counts = std::any_of(series.begin(), series.end(), [](const auto& r) { return r.count.has_value(); });
  out << (counts ? "year,cohort,rate,count\n" : "year,cohort,rate\n");
  for (const auto& r : series) {
    out << r.year << ',' << r.cohort << ',' << fmt9(r.rate);
    if (counts) {
      out << ',';
      if (r.count) out << *r.count;
    }
    out << '\n';
  }
}

inline void save_series(const std::string& path, const DefaultRateSeries& series) {
  auto out = detail::open_out(path);
  write_series(out, series);
}

struct Histogram {
  std::vector<double> edges;  // bins + 1 ascending edges over [0, max rate]
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [0, max rate]; the last bin is closed on the right.
inline Histogram histogram(const DefaultRateSeries& series, std::size_t bins) {
  if (bins < 2) throw std::domain_error("histogram needs at least 2 bins");
  if (series.empty()) throw std::domain_error("histogram of an empty series");
  double hi = 0.0;
  for (const auto& r : series) hi = std::max(hi, r.rate);
  if (hi == 0.0) hi = 1.0;
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = hi * static_cast<double>(k) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (const auto& r : series) {
    auto k = static_cast<std::size_t>(r.rate / hi * static_cast<double>(bins));
    ++h.counts[std::min(k, bins - 1)];
  }
  return h;
}

inline void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    out << fmt9(h.edges[k]) << ',' << fmt9(h.edges[k + 1]) << ',' << h.counts[k] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

struct FixtureSpec {
  std::string cohort;
  int first_year = 1920;
  std::size_t years = 91;
  DandelionEmpirical model;  // annual rate = peripheral defaults / n
  std::uint64_t seed = 0;
};

/// Speculative grade: 800 names, p = p0 = 2.8%, hub correlation 8%.
inline FixtureSpec speculative_grade_fixture(std::uint64_t seed = 1) {
  return {"SpecGrade", 1920, 91, {800, 0.028, 0.028, 0.08}, seed};
}

/// Caa-C: 80 names, p = 14.64%, p0 = 3%, and a bad state in which almost
/// every name defaults, so the rate support reaches 100%.
inline FixtureSpec caa_c_fixture(std::uint64_t seed = 2) {
  const double p0 = 0.03;
  const double p = (1.0 - p0) * 0.12 + p0 * 0.9999;
  const double q = p0 * 0.9999;
  return {"Caa-C", 1920, 91, {80, p, p0, correlation_from_joint(p, p0, q)}, seed};
}

/// Stratified inverse-CDF draws from the model's loss-count pmf: stratum k
/// of m contributes the quantile at (k + U_k)/m, then the draws are shuffled
/// across years. Stratification pins the sample mean close to the model mean.
inline DefaultRateSeries synthetic_series(const FixtureSpec& f) {
  const auto cal = calibrate_dandelion(f.model);
  const LossPmf pmf = dandelion_pmf(cal.params);
  std::vector<double> cdf(pmf.n() + 1);
  std::partial_sum(pmf.mass().begin(), pmf.mass().end(), cdf.begin());
  std::mt19937_64 rng(detail::splitmix64(f.seed));
  std::vector<double> rates(f.years);
  for (std::size_t k = 0; k < f.years; ++k) {
    const double u = (static_cast<double>(k) + detail::unit_uniform(rng)) / static_cast<double>(f.years);
    const auto it = std::lower_bound(cdf.begin(), cdf.end() - 1, u);
    rates[k] = static_cast<double>(it - cdf.begin()) / static_cast<double>(pmf.n());
  }
  std::shuffle(rates.begin(), rates.end(), rng);
  DefaultRateSeries s(f.years);
  for (std::size_t k = 0; k < f.years; ++k) {
    s[k].year = f.first_year + static_cast<int>(k);
    s[k].cohort = f.cohort;
    s[k].rate = rates[k];
    s[k].count = static_cast<long long>(f.model.n);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Portfolio specs

inline json to_json(const PortfolioSpec& spec) {
  json j;
  j["n"] = spec.n;
  j["nodes"] = json::array();
  for (NodeId i = 0; i < spec.n; ++i) {
    j["nodes"].push_back({{"id", i}, {"p", spec.p[i]}, {"exposure", spec.exposure[i]}});
  }
  j["edges"] = json::array();
  for (const auto& [e, r] : spec.rho) j["edges"].push_back({{"i", e.i}, {"j", e.j}, {"rho", r}});
  json rec;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ConstantLgd>) {
          rec = {{"model", "constant"}, {"params", {{"lgd", m.lgd}}}};
        } else if constexpr (std::is_same_v<M, LinearInAggregate>) {
          rec = {{"model", "linear"}, {"params", {{"capped", m.capped}}}};
        } else {
          rec = {{"model", "central"}, {"params", {{"a", m.a}, {"b", m.b}}}};
        }
      },
      spec.recovery);
  if (spec.hub) rec["params"]["hub"] = *spec.hub;
  j["recovery"] = rec;
  return j;
}

inline PortfolioSpec portfolio_from_json(const json& j) {
  try {
    PortfolioSpec s;
    s.n = j.at("n").get<std::size_t>();
    s.p.assign(s.n, std::numeric_limits<double>::quiet_NaN());
    s.exposure.assign(s.n, 1.0);
    std::vector<char> seen(s.n, 0);
    for (const auto& node : j.at("nodes")) {
      const auto id = node.at("id").get<std::size_t>();
      if (id >= s.n) throw ParseError("node id " + std::to_string(id) + " outside [0, n)");
      if (seen[id]) throw ParseError("duplicate node id " + std::to_string(id));
      seen[id] = 1;
      s.p[id] = node.at("p").get<double>();
      if (node.contains("exposure")) s.exposure[id] = node["exposure"].get<double>();
    }
    for (std::size_t i = 0; i < s.n; ++i) {
      if (!seen[i]) throw ParseError("node " + std::to_string(i) + " missing");
    }
    if (j.contains("edges")) {
      for (const auto& e : j["edges"]) {
        const auto a = e.at("i").get<std::size_t>();
        const auto b = e.at("j").get<std::size_t>();
        const Edge ed = make_edge(a, b);
        if (s.rho.count(ed)) throw ParseError("duplicate edge " + to_string(ed));
        s.rho[ed] = e.at("rho").get<double>();
      }
    }
    if (j.contains("hub")) s.hub = j["hub"].get<std::size_t>();
    if (j.contains("recovery")) {
      const auto& r = j["recovery"];
      const std::string model = r.value("model", "constant");
      const json params = r.value("params", json::object());
      if (params.contains("hub")) s.hub = params["hub"].get<std::size_t>();
      if (model == "constant") {
        s.recovery = ConstantLgd{params.value("lgd", 1.0)};
      } else if (model == "linear") {
        s.recovery = LinearInAggregate{params.value("capped", false)};
      } else if (model == "central") {
        s.recovery = CentralNodeDependent{params.at("a").get<double>(), params.at("b").get<double>()};
      } else {
        throw ParseError("unknown recovery model '" + model + "'");
      }
    }
    return s;
  } catch (const json::exception& ex) {
    throw ParseError(std::string("portfolio document: ") + ex.what());
  } catch (const std::domain_error& ex) {
    throw ParseError(std::string("portfolio document: ") + ex.what());
  }
}

inline PortfolioSpec load_portfolio(const std::string& path) {
  auto in = detail::open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw ParseError(path + ": " + ex.what());
  }
  return portfolio_from_json(j);
}

inline void save_portfolio(const std::string& path, const PortfolioSpec& spec) {
  auto out = detail::open_out(path);
  out << to_json(spec).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Model parameters

inline json to_json(const JungleParams& p) {
  json j;
  j["alpha"] = p.alpha;
  j["edges"] = json::array();
  for (const auto& [e, b] : p.beta) j["edges"].push_back({{"i", e.i}, {"j", e.j}, {"beta", b}});
  return j;
}

inline JungleParams params_from_json(const json& j) {
  try {
    JungleParams p;
    p.alpha = j.at("alpha").get<std::vector<double>>();
    if (j.contains("edges")) {
      for (const auto& e : j["edges"]) {
        p.beta[make_edge(e.at("i").get<std::size_t>(), e.at("j").get<std::size_t>())] = e.at("beta").get<double>();
      }
    }
    return p;
  } catch (const json::exception& ex) {
    throw ParseError(std::string("parameter document: ") + ex.what());
  }
}

inline JungleParams load_params(const std::string& path) {
  auto in = detail::open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw ParseError(path + ": " + ex.what());
  }
  return params_from_json(j);
}

// ---------------------------------------------------------------------------
// Loss pmf

inline void write_pmf_csv(std::ostream& out, const LossPmf& pmf) {
  out << "loss_count,loss_fraction,probability\n";
  const double n = pmf.n() ? static_cast<double>(pmf.n()) : 1.0;
  for (std::size_t l = 0; l <= pmf.n(); ++l) {
    out << l << ',' << fmt9(static_cast<double>(l) / n) << ',' << fmt9(pmf[l]) << '\n';
  }
}

inline LossPmf read_pmf_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty pmf file");
  ++lineno;
  if (detail::trim(line) != "loss_count,loss_fraction,probability") throw ParseError("unexpected pmf header", lineno);
  std::vector<double> mass;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 3) throw ParseError("expected 3 columns", lineno);
    const auto l = detail::parse_number<std::size_t>(cells[0], "loss_count", lineno);
    if (l != mass.size()) throw ParseError("loss counts must be consecutive from 0", lineno);
    mass.push_back(detail::parse_number<double>(cells[2], "probability", lineno));
  }
  return LossPmf::from_probabilities(mass);
}

// ---------------------------------------------------------------------------
// Risk and scans

inline json to_json(const RiskReport& r) {
  json j{{"confidence", r.confidence}, {"var", r.var}, {"es", r.es}, {"var_count", r.var_count}};
  j["modes"] = r.peaks.size();
  j["peaks"] = json::array();
  for (const auto& p : r.peaks) {
    j["peaks"].push_back({{"location", p.location}, {"fraction", p.fraction}, {"mass", p.mass}, {"prominence", p.prominence}});
  }
  return j;
}

inline void write_phase_csv(std::ostream& out, const PhaseGrid& g) {
  out << "alpha,beta,p,rho,grad_norm,on_ridge\n";
  for (std::size_t i = 0; i < g.alpha_axis.size(); ++i) {
    for (std::size_t j = 0; j < g.beta_axis.size(); ++j) {
      const std::size_t k = g.index(i, j);
      out << fmt9(g.alpha_axis[i]) << ',' << fmt9(g.beta_axis[j]) << ',' << fmt9(g.p[k]) << ','
          << fmt9(g.rho[k]) << ',' << fmt9(g.grad_norm[k]) << ',' << (g.on_ridge[k] ? 1 : 0) << '\n';
    }
  }
}

inline json phase_summary(const PhaseGrid& g) {
  json j{{"n", g.n}};
  j["transition_line"] = json::array();
  for (const auto& r : g.transition_line) {
    j["transition_line"].push_back({{"alpha", r.alpha}, {"beta", r.beta}, {"grad_norm", r.grad_norm}});
  }
  if (g.critical_point) {
    j["critical_point"] = {{"alpha", g.critical_point->first}, {"beta", g.critical_point->second}};
  } else {
    j["critical_point"] = nullptr;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Samples

inline void write_samples_csv(std::ostream& out, const SampleSet& s) {
  out << "draw,chain,loss_count,monetary_loss\n";
  for (std::size_t d = 0; d < s.size(); ++d) {
    out << d << ',' << s.chain_of(d) << ',' << s.loss_counts[d] << ',' << fmt9(s.monetary_losses[d]) << '\n';
  }
}

/// Binary state dump: a 16-byte header ("JNGL", u32 version = 1, u32 nodes,
/// u32 draws, little-endian) followed by one record of ceil(nodes/8) bytes
/// per draw; bit i%8 of byte i/8 is node i's default indicator.
inline void write_states_binary(std::ostream& out, const SampleSet& s) {
  auto put32 = [&](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xFFu));
  };
  out.write("JNGL", 4);
  put32(1);
  put32(static_cast<std::uint32_t>(s.nodes));
  put32(static_cast<std::uint32_t>(s.size()));
  const std::size_t bytes = (s.nodes + 7) / 8;
  std::vector<char> rec(bytes);
  for (std::size_t d = 0; d < s.size(); ++d) {
    std::fill(rec.begin(), rec.end(), 0);
    for (NodeId i = 0; i < s.nodes; ++i) {
      if (s.defaulted(d, i)) rec[i / 8] = static_cast<char>(rec[i / 8] | (1 << (i % 8)));
    }
    out.write(rec.data(), static_cast<std::streamsize>(bytes));
  }
}

inline std::vector<StateVector> read_states_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "JNGL") throw ParseError("not a state dump");
  auto get32 = [&]() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated state dump header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  if (get32() != 1) throw ParseError("unsupported state dump version");
  const std::size_t nodes = get32();
  const std::size_t draws = get32();
  const std::size_t bytes = (nodes + 7) / 8;
  std::vector<StateVector> out(draws, StateVector(nodes));
  std::vector<unsigned char> rec(bytes);
  for (std::size_t d = 0; d < draws; ++d) {
    if (!in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(bytes))) {
      throw ParseError("truncated state dump at draw " + std::to_string(d));
    }
    for (NodeId i = 0; i < nodes; ++i) out[d][i] = (rec[i / 8] >> (i % 8)) & 1u;
  }
  return out;
}

inline json to_json(const SamplerDiagnostics& d) {
  json j{{"split_rhat", d.split_rhat}, {"max_chain_tv", d.max_chain_tv}, {"chains_disagree", d.chains_disagree}};
  j["warnings"] = d.warnings;
  j["chains"] = json::array();
  for (const auto& c : d.chains) {
    j["chains"].push_back({{"flip_rate", c.flip_rate}, {"mean_loss_count", c.mean_loss_count}});
  }
  return j;
}

// ---------------------------------------------------------------------------
// Ensembles

inline json to_json(const EnsembleReport& r) {
  json j;
  j["family"] = to_string(r.family);
  j["confidence"] = r.confidence;
  j["any_systemic"] = r.any_systemic;
  j["labels"] = json::array();
  for (Regime g : r.labels) j["labels"].push_back(to_string(g));
  j["alpha_dispersion"] = r.alpha_dispersion;
  j["beta_dispersion"] = r.beta_dispersion;
  j["var_min"] = r.var_min;
  j["var_max"] = r.var_max;
  if (r.critical_point) {
    j["critical_point"] = {{"alpha", r.critical_point->first}, {"beta", r.critical_point->second}};
  }
  j["log"] = r.log;
  j["samples"] = json::array();
  for (const auto& s : r.samples) {
    json o{{"index", s.index}, {"origin", s.origin}, {"ok", s.ok}};
    if (!s.ok) {
      o["error"] = s.error;
    } else {
      o["alpha"] = s.alpha;
      o["beta"] = s.beta;
      o["residual"] = s.residual;
      o["regime"] = to_string(s.regime);
      o["modes"] = s.modes;
      o["var"] = s.var;
      o["es"] = s.es;
      if (std::isfinite(s.ridge_distance)) o["ridge_distance"] = s.ridge_distance;
      o["multiple_roots"] = s.multiple_roots;
    }
    j["samples"].push_back(std::move(o));
  }
  return j;
}

/// One row per sample; inputs and parameters are summarized by their means
/// so the column set is the same for every topology.
inline void write_ensemble_csv(std::ostream& out, const EnsembleReport& r) {
  out << "index,origin,ok,mean_p,mean_rho,mean_alpha,mean_beta,residual,regime,modes,var,es\n";
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (const auto& s : r.samples) {
    out << s.index << ',' << s.origin << ',' << (s.ok ? 1 : 0) << ',' << fmt9(mean(s.p)) << ','
        << fmt9(mean(s.rho)) << ',';
    if (s.ok) {
      out << fmt9(mean(s.alpha)) << ',' << fmt9(mean(s.beta)) << ',' << fmt9(s.residual) << ','
          << to_string(s.regime) << ',' << s.modes << ',' << fmt9(s.var) << ',' << fmt9(s.es) << '\n';
    } else {
      out << ",,,failed,,,\n";
    }
  }
}

}  // namespace jungle
