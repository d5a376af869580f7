#pragma once

// Batch command-line front end: subcommands binding the library operations,
// JSON / aligned-text report emission, and error-to-exit-code mapping.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmatch/association.hpp"
#include "mmatch/estimation.hpp"
#include "mmatch/io.hpp"
#include "mmatch/logit.hpp"
#include "mmatch/market.hpp"
#include "mmatch/order.hpp"
#include "mmatch/planner.hpp"
#include "mmatch/sorting.hpp"

namespace mmatch::cli {

inline constexpr const char* kSpecVersion = "1.0";

using json = io::json;

struct RunConfig {
  double tol = 1e-9;
  std::uint64_t seed = 0;
  double sigma_delta = 1.0;
  long max_iters = 100000;
  std::size_t budget = 1000000;
  int threads = 0;
  std::string format = "json";
  std::string out_path;

  // Subcommand inputs.
  std::string market, matching, other, pattern, output, couples, table, counts;
  std::string women, men, theta, empirical, predicted;
  std::string method = "annealing";
  std::size_t n = 0;
  int restarts = 5;
  bool oracle = false;
  std::size_t oracle_units = 8;
  double kl = -1.0, entropy = -1.0;
};

namespace detail {

inline json couple_json(const Couple& c) {
  return {{"x", c.x}, {"y", c.y}};
}

inline json witness_json(const SortingCheck& s) {
  json j = {{"holds", s.holds}, {"mass_threshold", s.mass_tol}};
  if (s.witness) j["witness"] = {couple_json(s.witness->first), couple_json(s.witness->second)};
  return j;
}

inline json transfer_json(const Transfer& t) {
  return {{"x", t.x}, {"x_prime", t.xp}, {"y", t.y}, {"y_prime", t.yp}, {"alpha", t.alpha}};
}

inline json certificate_json(const ConeCertificate& c) {
  json j = {{"verified", c.verified}, {"residual", c.residual}};
  json w = json::array();
  for (const auto& t : c.weights) w.push_back(transfer_json(t));
  j["weights"] = w;
  if (c.separating_q) {
    json q = json::array();
    for (const auto& [cell, v] : *c.separating_q) q.push_back({{"x", cell.x}, {"y", cell.y}, {"q", v}});
    j["separating_q"] = {{"tabulated", q}};
  }
  return j;
}

inline json table_json(const BivariateTable& t) {
  return {{"rows", t.rows}, {"cols", t.cols}, {"mass", t.mass}};
}

inline json gamma_json(const GammaResult& g) {
  return {{"gamma", g.gamma},
          {"C", g.C},
          {"D", g.D},
          {"ties", g.ties},
          {"concordant_pairs", g.counts.concordant},
          {"discordant_pairs", g.counts.discordant},
          {"tied_pairs", g.counts.ties},
          {"total_pairs", g.counts.pairs}};
}

inline json params_json(const ParamVector& p) {
  json th = {{"HH", p.theta_hh()}, {"HE", p.theta_he()}, {"EH", p.theta_eh()}, {"EE", p.theta_ee()}};
  std::vector<double> off(p.offsets.begin(), p.offsets.end());
  for (double& v : off) v -= p.offsets[0];
  return {{"theta", th}, {"theta_matrix_EH_order", {{p.theta[0][0], p.theta[0][1]}, {p.theta[1][0], p.theta[1][1]}}},
          {"offsets", off}};
}

inline json diagnostics_json(const FitDiagnostics& d) {
  const char* names[4] = {"HH", "HE", "EH", "EE"};
  json pg, eg;
  for (int k = 0; k < 4; ++k) {
    pg[names[k]] = d.predicted_gammas[k];
    eg[names[k]] = d.empirical_gammas[k];
  }
  return {{"kl_divergence_bits", d.kl_divergence},
          {"shannon_entropy_predicted_bits", d.shannon_entropy},
          {"efficiency_loss_percent", d.efficiency_loss_percent},
          {"predicted_gammas", pg},
          {"empirical_gammas", eg}};
}

inline TypeMatrix type_matrix_from_table(const BivariateTable& t, const std::string& what) {
  if (t.rows.size() != kTypes || t.cols.size() != kTypes)
    throw DataError(what + ": expected a 25x25 type table");
  TypeMatrix m{};
  for (int r = 0; r < kTypes; ++r)
    for (int c = 0; c < kTypes; ++c) m[r][c] = t.mass[r][c];
  return m;
}

inline TypeMatrix normalized(TypeMatrix m) {
  double s = 0.0;
  for (const auto& row : m)
    for (double v : row) s += v;
  if (!(s > 0.0)) throw DataError("type table has no mass");
  for (auto& row : m)
    for (double& v : row) v /= s;
  return m;
}

inline TypeVector type_vector_from_table(const BivariateTable& t, const std::string& what) {
  if (t.rows.size() != kLevels || t.cols.size() != kLevels)
    throw DataError(what + ": expected a 5x5 health x education table");
  return type_distribution(t.mass);
}

/// Flattens a JSON report into aligned `key  value` lines.
inline void render_text(const json& j, const std::string& prefix,
                        std::vector<std::pair<std::string, std::string>>& rows) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      render_text(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), rows);
  } else if (j.is_array() && std::any_of(j.begin(), j.end(), [](const json& e) { return e.is_structured() && !e.is_array(); })) {
    for (std::size_t k = 0; k < j.size(); ++k) render_text(j[k], prefix + "[" + std::to_string(k) + "]", rows);
  } else {
    rows.emplace_back(prefix, j.is_string() ? j.get<std::string>() : j.dump());
  }
}

inline std::string text_report(const json& j) {
  std::vector<std::pair<std::string, std::string>> rows;
  render_text(j, "", rows);
  std::size_t w = 0;
  for (const auto& r : rows) w = std::max(w, r.first.size());
  std::ostringstream os;
  for (const auto& [k, v] : rows) os << std::left << std::setw(static_cast<int>(w + 2)) << k << v << '\n';
  return os.str();
}

inline void require(const std::string& v, const char* flag) {
  if (v.empty()) throw UsageError(std::string("missing required option ") + flag);
}

}  // namespace detail

inline json cmd_solve(const RunConfig& cfg) {
  detail::require(cfg.market, "--market");
  detail::require(cfg.output, "--output");
  const auto m = io::market_from_json(io::parse_json(io::read_file(cfg.market), cfg.market));
  const auto Q = io::output_from_json(io::parse_json(io::read_file(cfg.output), cfg.output));
  PlannerOptions opt;
  opt.tol = cfg.tol;
  const auto sol = solve_planner(m, Q, opt);
  json j = {{"value", sol.value}, {"integral", sol.integral}, {"scale", sol.scale}};
  j["matching"] = io::to_json(sol.matching);
  if (cfg.oracle) {
    const auto orc = brute_force_oracle(m, Q, cfg.oracle_units);
    j["oracle"] = {{"value", orc.value}, {"optimal_plans", orc.all_optimal.size()},
                   {"solver_plan_optimal", orc.all_optimal.count(sol.matching) > 0}};
  }
  return j;
}

inline json cmd_sort_check(const RunConfig& cfg) {
  detail::require(cfg.pattern, "--pattern");
  const auto pattern = io::pattern_from_json(io::parse_json(io::read_file(cfg.pattern), cfg.pattern));
  json j;
  if (!cfg.matching.empty()) {
    const auto M = io::matching_from_json(io::parse_json(io::read_file(cfg.matching), cfg.matching));
    if (!M.cells().empty()) pattern.validate(M.firm_dim(), M.worker_dim());
    j["global"] = detail::witness_json(check_global_pn(M, pattern));
    j["within_group"] = detail::witness_json(check_within_group(M, pattern));
    j["weak"] = detail::witness_json(check_weak_pn(M, pattern));
  }
  if (!cfg.market.empty()) {
    const auto m = io::market_from_json(io::parse_json(io::read_file(cfg.market), cfg.market));
    const auto s = exists_global_pn(m, pattern, cfg.budget, cfg.tol);
    json e = {{"status", to_string(s.status)}, {"nodes", s.nodes}, {"cliques_checked", s.cliques_checked}};
    if (s.witness) e["witness"] = io::to_json(*s.witness);
    j["global_sorting_exists"] = e;
  }
  if (cfg.matching.empty() && cfg.market.empty())
    throw UsageError("sort-check needs --matching and/or --market");
  return j;
}

inline json cmd_dominance(const RunConfig& cfg) {
  detail::require(cfg.matching, "--matching");
  detail::require(cfg.pattern, "--pattern");
  const auto pattern = io::pattern_from_json(io::parse_json(io::read_file(cfg.pattern), cfg.pattern));
  const auto M = io::matching_from_json(io::parse_json(io::read_file(cfg.matching), cfg.matching));
  OrderOptions opt;
  opt.tol = cfg.tol;
  json j;
  if (!cfg.other.empty()) {
    const auto Mp = io::matching_from_json(io::parse_json(io::read_file(cfg.other), cfg.other));
    const auto d = dominates_pn(M, Mp, pattern, opt);
    j["dominates"] = d.dominates;
    j["generators"] = d.generators;
    j["certificate"] = detail::certificate_json(d.cert);
  }
  const auto u = is_undominated(M, pattern, opt);
  json uj = {{"undominated", u.undominated}, {"gain", u.gain}, {"generators", u.generators}};
  if (u.direction) uj["direction"] = detail::certificate_json(*u.direction);
  if (u.improved) uj["improved"] = io::to_json(*u.improved);
  j["undominance"] = uj;
  return j;
}

inline json cmd_ipf(const RunConfig& cfg) {
  detail::require(cfg.market, "--market");
  detail::require(cfg.output, "--output");
  const auto m = io::market_from_json(io::parse_json(io::read_file(cfg.market), cfg.market));
  const auto Q = io::output_from_json(io::parse_json(io::read_file(cfg.output), cfg.output));
  LogitConfig lc;
  lc.sigma_delta = cfg.sigma_delta;
  lc.ipf_tol = cfg.tol;
  lc.max_iters = cfg.max_iters;
  const auto sol = ipf_equilibrium(Q, m.firms, m.workers, lc);
  json fp = json::array(), wp = json::array();
  for (const auto& [x, v] : sol.firm_potential) fp.push_back({{"x", x}, {"phi", v}});
  for (const auto& [y, v] : sol.worker_potential) wp.push_back({{"y", y}, {"varphi", v}});
  json j = {{"density", io::to_json(sol.density)},
            {"firm_potentials", fp},
            {"worker_potentials", wp},
            {"normalizer", sol.normalizer},
            {"sigma_delta", sol.sigma_delta},
            {"iterations", sol.iterations},
            {"max_marginal_error", sol.max_marginal_error},
            {"warnings", sol.warnings}};
  if (!cfg.pattern.empty()) {
    const auto pattern = io::pattern_from_json(io::parse_json(io::read_file(cfg.pattern), cfg.pattern));
    const auto c = check_log_pn(sol, pattern);
    j["log_pn_modular"] = c.holds;
  }
  return j;
}

inline json cmd_gamma(const RunConfig& cfg) {
  json j;
  if (!cfg.table.empty()) {
    const auto t = io::parse_joint_table(io::read_file(cfg.table));
    j["table"] = detail::gamma_json(kruskal_gamma(t));
  } else {
    detail::require(cfg.couples, "--couples or --table");
    const auto parsed = io::parse_couples(io::read_file(cfg.couples));
    j["records"] = parsed.data.records.size();
    j["warnings"] = parsed.warnings;
    json g;
    auto specs = standard_gamma_specs();
    specs.push_back(gamma_wm_eh());
    specs.push_back(gamma_wm_ee());
    for (const auto& s : specs) {
      try {
        g[s.name] = detail::gamma_json(kruskal_gamma(parsed.data, s));
      } catch (const DataError& e) {
        g[s.name] = {{"error", e.what()}};
      }
    }
    j["gammas"] = g;
  }
  return j;
}

inline json cmd_estimate(const RunConfig& cfg) {
  TypeMatrix counts{};
  json j;
  if (!cfg.counts.empty()) {
    counts = detail::type_matrix_from_table(io::parse_joint_table(io::read_file(cfg.counts)), cfg.counts);
  } else {
    detail::require(cfg.couples, "--couples or --counts");
    const auto parsed = io::parse_couples(io::read_file(cfg.couples));
    j["warnings"] = parsed.warnings;
    counts = type_counts(parsed.data);
  }
  FitConfig fc;
  fc.seed = cfg.seed;
  fc.threads = cfg.threads;
  fc.restarts = cfg.restarts;
  if (cfg.method == "ascent")
    fc.method = FitMethod::Ascent;
  else if (cfg.method != "annealing")
    throw UsageError("--method must be annealing or ascent");
  const auto fit = fit_mle(counts, woman_fractions(counts), fc);
  j["params"] = detail::params_json(fit.params);
  j["log_likelihood"] = {{"total", fit.log_likelihood.total()},
                         {"choice_part", fit.log_likelihood.choice},
                         {"constant_part", fit.log_likelihood.constant}};
  j["restart_objectives"] = fit.restart_objectives;
  j["best_restart"] = fit.best_restart;
  j["newton_steps"] = fit.newton_steps;
  j["gradient_max"] = fit.gradient_max;
  if (fit.diagnostics)
    j["diagnostics"] = detail::diagnostics_json(*fit.diagnostics);
  else
    j["diagnostics_unavailable"] = fit.diagnostics_note;
  return j;
}

inline ParamVector simulation_params(const RunConfig& cfg, TypeVector& f_w) {
  ParamVector p = benchmark_theta();
  if (!cfg.theta.empty()) {
    const auto t = io::matrix_from_json(
        io::detail::field(io::parse_json(io::read_file(cfg.theta), cfg.theta), "theta", cfg.theta),
        "theta");
    if (t.size() != kAttrs || t[0].size() != kAttrs) throw DataError("theta must be 2x2 in (E,H) order");
    for (int k = 0; k < kAttrs; ++k)
      for (int l = 0; l < kAttrs; ++l) p.theta[k][l] = t[k][l];
  }
  detail::require(cfg.women, "--women");
  f_w = detail::type_vector_from_table(io::parse_joint_table(io::read_file(cfg.women)), cfg.women);
  if (!cfg.men.empty()) {
    const auto g = detail::type_vector_from_table(io::parse_joint_table(io::read_file(cfg.men)), cfg.men);
    LogitConfig lc;
    lc.max_iters = cfg.max_iters;
    p = equilibrium_params(p, f_w, g, lc);
  }
  return p;
}

inline json cmd_simulate(const RunConfig& cfg) {
  if (cfg.n == 0) throw UsageError("--n must be positive");
  detail::require(cfg.out_path, "--out");
  TypeVector f_w{};
  const auto p = simulation_params(cfg, f_w);
  const auto data = simulate_couples(p, f_w, cfg.n, cfg.seed);
  std::ofstream os(cfg.out_path);
  if (!os) throw DataError("cannot write " + cfg.out_path);
  os << "weight,x_E,x_H,y_E,y_H\n";
  for (const auto& r : data.records)
    os << r.weight << ',' << r.x[0] << ',' << r.x[1] << ',' << r.y[0] << ',' << r.y[1] << '\n';
  return {{"records", data.records.size()}, {"seed", cfg.seed}, {"couples_csv", cfg.out_path},
          {"params", detail::params_json(p)}};
}

inline json cmd_diagnostics(const RunConfig& cfg) {
  if (!cfg.empirical.empty() || !cfg.predicted.empty()) {
    detail::require(cfg.empirical, "--empirical");
    detail::require(cfg.predicted, "--predicted");
    const auto e = detail::normalized(
        detail::type_matrix_from_table(io::parse_joint_table(io::read_file(cfg.empirical)), cfg.empirical));
    const auto p = detail::normalized(
        detail::type_matrix_from_table(io::parse_joint_table(io::read_file(cfg.predicted)), cfg.predicted));
    return detail::diagnostics_json(diagnostics(e, p));
  }
  if (cfg.kl < 0.0 || cfg.entropy < 0.0)
    throw UsageError("diagnostics needs --empirical/--predicted or --kl/--entropy");
  return {{"kl_divergence_bits", cfg.kl},
          {"shannon_entropy_predicted_bits", cfg.entropy},
          {"efficiency_loss_percent", efficiency_loss(cfg.kl, cfg.entropy)}};
}

/// Parses argv, runs one subcommand and writes its report. Returns the exit
/// status: 0 success, 1 usage, 2 data, 3 numerical.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Multidimensional matching markets: planner, sorting, order, logit and estimation"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.add_option("--tol", cfg.tol, "numerical tolerance")->check(CLI::PositiveNumber);
  app.add_option("--seed", cfg.seed, "random seed (all randomness derives from it)");
  app.add_option("--sigma-delta", cfg.sigma_delta, "sum of the Gumbel scale parameters")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-iters", cfg.max_iters, "iteration limit")->check(CLI::PositiveNumber);
  app.add_option("--budget", cfg.budget, "search node budget");
  app.add_option("--threads", cfg.threads, "worker threads (0 = automatic)")->check(CLI::NonNegativeNumber);
  app.add_option("--format", cfg.format, "report format")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--out", cfg.out_path, "output file (report, or couples CSV for simulate)");

  auto* solve = app.add_subcommand("solve", "optimal transportation plan");
  solve->add_option("--market", cfg.market, "market JSON")->required();
  solve->add_option("--output", cfg.output, "output-function JSON")->required();
  solve->add_flag("--oracle", cfg.oracle, "confirm with the brute-force oracle");
  solve->add_option("--oracle-units", cfg.oracle_units, "oracle size limit in unit agents");

  auto* sort = app.add_subcommand("sort-check", "sorting verdicts and global-sorting existence");
  sort->add_option("--matching", cfg.matching, "matching JSON");
  sort->add_option("--market", cfg.market, "market JSON for the existence search");
  sort->add_option("--pattern", cfg.pattern, "pattern JSON")->required();

  auto* dom = app.add_subcommand("dominance", "P,N modular order dominance and undominance");
  dom->add_option("--matching", cfg.matching, "matching JSON (M)")->required();
  dom->add_option("--other", cfg.other, "matching JSON (M')");
  dom->add_option("--pattern", cfg.pattern, "pattern JSON")->required();

  auto* ipf = app.add_subcommand("ipf", "logit matching equilibrium");
  ipf->add_option("--market", cfg.market, "type densities as market JSON")->required();
  ipf->add_option("--output", cfg.output, "output-function JSON")->required();
  ipf->add_option("--pattern", cfg.pattern, "optional pattern JSON for the log-modularity check");

  auto* gam = app.add_subcommand("gamma", "Kruskal gamma statistics");
  gam->add_option("--couples", cfg.couples, "couples CSV");
  gam->add_option("--table", cfg.table, "joint-table CSV");

  auto* est = app.add_subcommand("estimate", "conditional-logit estimation");
  est->add_option("--couples", cfg.couples, "couples CSV");
  est->add_option("--counts", cfg.counts, "25x25 type-count CSV");
  est->add_option("--method", cfg.method, "annealing or ascent");
  est->add_option("--restarts", cfg.restarts, "annealing restarts")->check(CLI::PositiveNumber);

  auto* sim = app.add_subcommand("simulate", "simulate couples from the logit model");
  sim->add_option("--n", cfg.n, "number of couples")->required();
  sim->add_option("--theta", cfg.theta, "theta JSON {\"theta\": 2x2 in (E,H) order}");
  sim->add_option("--women", cfg.women, "women's 5x5 health x education CSV")->required();
  sim->add_option("--men", cfg.men, "men's 5x5 health x education CSV (equilibrium offsets)");

  auto* dia = app.add_subcommand("diagnostics", "fit diagnostics");
  dia->add_option("--empirical", cfg.empirical, "25x25 empirical density or counts CSV");
  dia->add_option("--predicted", cfg.predicted, "25x25 predicted density CSV");
  dia->add_option("--kl", cfg.kl, "KL divergence in bits");
  dia->add_option("--entropy", cfg.entropy, "entropy in bits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Usage);
  }

  try {
    json report = {{"spec_version", kSpecVersion}};
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    report["command"] = name;
    json body;
    if (name == "solve") body = cmd_solve(cfg);
    else if (name == "sort-check") body = cmd_sort_check(cfg);
    else if (name == "dominance") body = cmd_dominance(cfg);
    else if (name == "ipf") body = cmd_ipf(cfg);
    else if (name == "gamma") body = cmd_gamma(cfg);
    else if (name == "estimate") body = cmd_estimate(cfg);
    else if (name == "simulate") body = cmd_simulate(cfg);
    else if (name == "diagnostics") body = cmd_diagnostics(cfg);
    else throw UsageError("unknown subcommand " + name);
    for (auto it = body.begin(); it != body.end(); ++it) report[it.key()] = it.value();

    const std::string text = cfg.format == "text" ? detail::text_report(report) : report.dump(2) + "\n";
    if (!cfg.out_path.empty() && name != "simulate") {
      std::ofstream os(cfg.out_path);
      if (!os) throw DataError("cannot write " + cfg.out_path);
      os << text;
    } else {
      out << text;
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Numerical);
  }
}

}  // namespace mmatch::cli
