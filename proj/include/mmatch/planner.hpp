#pragma once

// The planner's problem on finite markets: an exact transportation solver, a
// brute-force permutation oracle, unidimensional assortative couplings and a
// harness that checks the sorting guarantees of optimal plans.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "mmatch/flow.hpp"
#include "mmatch/market.hpp"
#include "mmatch/modularity.hpp"
#include "mmatch/sorting.hpp"

namespace mmatch {

struct PlannerOptions {
  double scale = 1e9;       // fixed-point scale for non-integer masses
  double tol = 1e-9;        // market balance tolerance
  double cost_eps = 1e-9;   // objective ties closer than this break lexicographically
};

struct PlannerSolution {
  MatchingMeasure matching;
  double value = 0.0;
  bool integral = true;          // masses were integers and so is the plan
  double scale = 1.0;            // fixed-point scale used internally
  std::optional<std::size_t> optimal_plans;  // filled by callers holding an oracle count
};

namespace detail {

/// Rounds masses to integers at `scale`, repairing the rounding imbalance on
/// the largest worker atom so that both sides carry the same integer total.
inline void fixed_point(const std::vector<Atom>& fs, const std::vector<Atom>& ws, double scale,
                        std::vector<std::int64_t>& fi, std::vector<std::int64_t>& wi) {
  fi.clear();
  wi.clear();
  for (const auto& a : fs) fi.push_back(std::llround(a.mass * scale));
  for (const auto& a : ws) wi.push_back(std::llround(a.mass * scale));
  const std::int64_t diff = std::accumulate(fi.begin(), fi.end(), std::int64_t{0}) -
                            std::accumulate(wi.begin(), wi.end(), std::int64_t{0});
  if (diff != 0 && !wi.empty()) {
    const auto big = std::max_element(wi.begin(), wi.end()) - wi.begin();
    wi[big] += diff;
    if (wi[big] < 0) throw NumericalError("fixed-point repair produced negative mass");
  }
}

inline std::vector<Atom> positive_atoms(const DiscreteMeasure& d) {
  std::vector<Atom> out;
  for (const auto& a : d.merged().atoms)
    if (a.mass > 0.0) out.push_back(a);
  return out;
}

inline void require_valid(const MarketInstance& m, double tol) {
  const auto rep = validate_market(m, tol);
  if (!rep.ok()) throw DataError("invalid market: " + rep.violations.front());
}

}  // namespace detail

/// Exact optimal transportation plan by min-cost flow. Among optimal plans the
/// one minimizing sum(mass * cell rank), cells ranked lexicographically, is
/// returned so the answer does not depend on solver internals.
inline PlannerSolution solve_planner(const MarketInstance& m, const OutputSpec& Q,
                                     const PlannerOptions& opt = {}) {
  detail::require_valid(m, opt.tol);
  const auto fs = detail::positive_atoms(m.firms);
  const auto ws = detail::positive_atoms(m.workers);
  PlannerSolution sol;
  sol.matching = MatchingMeasure(m.firms.dimension, m.workers.dimension);
  if (fs.empty()) return sol;

  sol.integral = m.firms.all_integral() && m.workers.all_integral();
  sol.scale = sol.integral ? 1.0 : opt.scale;
  std::vector<std::int64_t> fi, wi;
  detail::fixed_point(fs, ws, sol.scale, fi, wi);

  const int nf = static_cast<int>(fs.size());
  const int nw = static_cast<int>(ws.size());
  const int S = nf + nw, T = S + 1;
  flow::MinCostFlow mcf(nf + nw + 2, opt.cost_eps);
  const std::int64_t total = std::accumulate(fi.begin(), fi.end(), std::int64_t{0});
  for (int i = 0; i < nf; ++i) mcf.add_edge(S, i, fi[i], {});
  for (int j = 0; j < nw; ++j) mcf.add_edge(nf + j, T, wi[j], {});
  std::vector<int> arc(static_cast<std::size_t>(nf * nw));
  for (int i = 0; i < nf; ++i)
    for (int j = 0; j < nw; ++j) {
      const double q = Q(fs[i].attrs, ws[j].attrs);
      if (!std::isfinite(q))
        throw DataError("output is not finite at " + to_string(Couple{fs[i].attrs, ws[j].attrs}));
      arc[i * nw + j] = mcf.add_edge(i, nf + j, total, {-q, static_cast<std::int64_t>(i * nw + j)});
    }
  const std::int64_t sent = mcf.run(S, T, total);
  if (sent != total) throw NumericalError("transportation flow incomplete");

  for (int i = 0; i < nf; ++i)
    for (int j = 0; j < nw; ++j) {
      const std::int64_t f = mcf.flow_on(i, arc[i * nw + j]);
      if (f > 0) sol.matching.add(fs[i].attrs, ws[j].attrs, static_cast<double>(f) / sol.scale);
    }
  sol.value = sol.matching.integrate(Q);
  return sol;
}

struct OracleResult {
  double value = 0.0;
  std::set<MatchingMeasure> all_optimal;
  std::set<MatchingMeasure> all_plans;  // every feasible aggregated plan
};

/// Enumerates every perfect matching of the unit-expanded market (integer
/// masses, total at most `max_units`) and returns the exact optimum with all
/// optimal aggregated plans. Worker units of the same type are
/// interchangeable, so only distinct arrangements of worker types over the
/// firm units are visited.
inline OracleResult brute_force_oracle(const MarketInstance& m, const OutputSpec& Q,
                                       std::size_t max_units = 8, double tie_tol = 1e-9) {
  detail::require_valid(m, 1e-9);
  if (!m.firms.all_integral() || !m.workers.all_integral())
    throw DataError("oracle requires integer masses");
  const auto fs = detail::positive_atoms(m.firms);
  const auto ws = detail::positive_atoms(m.workers);
  std::vector<std::size_t> fu, wu;  // unit -> atom index
  for (std::size_t a = 0; a < fs.size(); ++a)
    for (std::int64_t k = 0; k < std::llround(fs[a].mass); ++k) fu.push_back(a);
  for (std::size_t b = 0; b < ws.size(); ++b)
    for (std::int64_t k = 0; k < std::llround(ws[b].mass); ++k) wu.push_back(b);
  if (fu.size() > max_units)
    throw DataError("oracle instance too large: " + std::to_string(fu.size()) + " units > " +
                    std::to_string(max_units));
  const std::size_t n = fu.size(), nw = ws.size();
  std::vector<double> q(fs.size() * nw);
  for (std::size_t a = 0; a < fs.size(); ++a)
    for (std::size_t b = 0; b < nw; ++b) q[a * nw + b] = Q(fs[a].attrs, ws[b].attrs);

  OracleResult r;
  std::map<std::vector<int>, double> plans;  // cell counts -> value
  std::vector<int> counts(fs.size() * nw);
  do {  // wu starts sorted, so next_permutation visits each distinct arrangement once
    std::fill(counts.begin(), counts.end(), 0);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[fu[i] * nw + wu[i]];
      v += q[fu[i] * nw + wu[i]];
    }
    plans.emplace(counts, v);
  } while (std::next_permutation(wu.begin(), wu.end()));

  const auto to_measure = [&](const std::vector<int>& c) {
    MatchingMeasure M(m.firms.dimension, m.workers.dimension);
    for (std::size_t a = 0; a < fs.size(); ++a)
      for (std::size_t b = 0; b < nw; ++b)
        if (c[a * nw + b] > 0) M.add(fs[a].attrs, ws[b].attrs, c[a * nw + b]);
    return M;
  };
  if (n == 0) {
    r.all_optimal.insert(MatchingMeasure(m.firms.dimension, m.workers.dimension));
    r.all_plans = r.all_optimal;
    return r;
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [c, v] : plans) best = std::max(best, v);
  r.value = best;
  const double cut = tie_tol * std::max(1.0, std::abs(best));
  for (const auto& [c, v] : plans) {
    auto M = to_measure(c);
    if (v >= best - cut) r.all_optimal.insert(M);
    r.all_plans.insert(std::move(M));
  }
  return r;
}

enum class Direction { Positive, Negative };

/// Comonotone (positive) or antimonotone (negative) coupling of two
/// unidimensional measures: the northwest-corner rule on sorted supports.
inline MatchingMeasure assortative_coupling(const DiscreteMeasure& F, const DiscreteMeasure& G,
                                            Direction dir, double tol = 1e-9) {
  if (F.dimension != 1 || G.dimension != 1)
    throw DataError("assortative coupling needs unidimensional measures, got dimensions " +
                    std::to_string(F.dimension) + " and " + std::to_string(G.dimension));
  if (!masses_equal(F.total_mass(), G.total_mass(), tol))
    throw DataError("mass mismatch " + format_number(std::abs(F.total_mass() - G.total_mass())));
  auto fs = detail::positive_atoms(F);
  auto ws = detail::positive_atoms(G);
  if (dir == Direction::Negative) std::reverse(ws.begin(), ws.end());
  MatchingMeasure M(1, 1);
  std::size_t i = 0, j = 0;
  double fr = fs.empty() ? 0.0 : fs[0].mass;
  double wr = ws.empty() ? 0.0 : ws[0].mass;
  const double eps = tol * std::max(1.0, F.total_mass());
  while (i < fs.size() && j < ws.size()) {
    const double t = std::min(fr, wr);
    if (t > 0.0) M.add(fs[i].attrs, ws[j].attrs, t);
    fr -= t;
    wr -= t;
    if (fr <= eps && ++i < fs.size()) fr = fs[i].mass;
    if (wr <= eps && ++j < ws.size()) wr = ws[j].mass;
  }
  return M;
}

/// Outcome of checking the sorting guarantees of optimal plans on one
/// oracle-sized instance. Optional clauses are empty when their hypothesis
/// does not apply.
struct OptimalSortingReport {
  bool q_modular = false;         // Q carries the pattern's sign structure
  bool q_strict = false;          // ... strictly
  std::size_t plans = 0;          // feasible aggregated plans enumerated
  std::size_t optima = 0;         // optimal plans
  std::size_t weak_sorted_plans = 0;
  std::vector<MatchingMeasure> weak_violating_plans;  // never optimal when strict
  bool within_group_on_weak = true;                   // clause 1.a
  std::optional<bool> all_optima_weak;                // clause 1.b
  std::optional<bool> some_optimum_weak;              // clause 1.c
  SearchStatus global_sorting = SearchStatus::Inconclusive;
  std::optional<bool> all_optima_global;              // clause 2, strict case
  std::optional<bool> global_witness_optimal;         // clause 2, modular case
  double optimal_value = 0.0;
  bool solver_matches_oracle = true;

  bool holds() const {
    auto ok = [](const std::optional<bool>& b) { return !b || *b; };
    return within_group_on_weak && ok(all_optima_weak) && ok(some_optimum_weak) &&
           ok(all_optima_global) && ok(global_witness_optimal) && solver_matches_oracle;
  }
};

namespace detail {

/// Sign structure of Q relative to a pattern. Quadratic specs are judged by
/// their coefficients (exact on all of R^K x R^L); others on the support grid.
inline std::pair<bool, bool> pattern_membership(const OutputSpec& Q,
                                                const ComplementarityPattern& pattern,
                                                const SupportGrid& grid) {
  if (Q.is_quadratic()) {
    const auto& th = Q.theta();
    bool modular = true, strict = true;
    for (std::size_t k = 0; k < th.size(); ++k)
      for (std::size_t l = 0; l < th[k].size(); ++l) {
        const std::pair<int, int> kl{static_cast<int>(k + 1), static_cast<int>(l + 1)};
        const double t = th[k][l];
        if (pattern.P.count(kl)) {
          if (t < 0.0) modular = false;
          if (!(t > 0.0)) strict = false;
        } else if (pattern.N.count(kl)) {
          if (t > 0.0) modular = false;
          if (!(t < 0.0)) strict = false;
        } else if (t != 0.0) {
          modular = strict = false;
        }
      }
    return {modular, modular && strict};
  }
  const bool modular = is_pn_modular(Q, pattern, grid, false);
  return {modular, modular && is_pn_modular(Q, pattern, grid, true)};
}

}  // namespace detail

inline OptimalSortingReport verify_prop1(const MarketInstance& m, const OutputSpec& Q,
                                const ComplementarityPattern& pattern,
                                std::size_t max_units = 8) {
  pattern.validate(m.firms.dimension, m.workers.dimension);
  OptimalSortingReport r;
  const auto grid = SupportGrid::from_market(m);
  std::tie(r.q_modular, r.q_strict) = detail::pattern_membership(Q, pattern, grid);

  const auto oracle = brute_force_oracle(m, Q, max_units);
  r.plans = oracle.all_plans.size();
  r.optima = oracle.all_optimal.size();
  r.optimal_value = oracle.value;

  for (const auto& M : oracle.all_plans) {
    if (check_weak_pn(M, pattern).holds) {
      ++r.weak_sorted_plans;
      if (!check_within_group(M, pattern).holds) r.within_group_on_weak = false;
    } else {
      r.weak_violating_plans.push_back(M);
    }
  }
  if (r.q_strict) {
    bool all = true;
    for (const auto& M : oracle.all_optimal) all = all && check_weak_pn(M, pattern).holds;
    r.all_optima_weak = all;
  }
  if (r.q_modular) {
    bool some = false;
    for (const auto& M : oracle.all_optimal) some = some || check_weak_pn(M, pattern).holds;
    r.some_optimum_weak = some;
  }

  const auto search = exists_global_pn(m, pattern);
  r.global_sorting = search.status;
  if (search.status == SearchStatus::Exists) {
    if (r.q_strict) {
      bool all = true;
      for (const auto& M : oracle.all_optimal) all = all && check_global_pn(M, pattern).holds;
      r.all_optima_global = all;
    }
    if (r.q_modular && search.witness) {
      const double v = search.witness->integrate(Q);
      r.global_witness_optimal = v >= oracle.value - 1e-9 * std::max(1.0, std::abs(oracle.value));
    }
  }

  const auto sol = solve_planner(m, Q);
  r.solver_matches_oracle =
      std::abs(sol.value - oracle.value) <= 1e-9 * std::max(1.0, std::abs(oracle.value));
  return r;
}

}  // namespace mmatch
