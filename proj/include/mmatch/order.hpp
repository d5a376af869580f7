#pragma once

// Dominance and undominance in the P,N modular order, decided as linear
// programs over concordance-improving transfer vectors on a finite grid.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmatch/lp.hpp"
#include "mmatch/market.hpp"
#include "mmatch/sorting.hpp"

namespace mmatch {

/// Either nonnegative transfer weights whose sum maps one measure onto the
/// other, or a tabulated output direction separating them.
struct ConeCertificate {
  std::vector<Transfer> weights;                        // alpha > 0 entries only
  std::optional<std::map<Couple, double>> separating_q;  // Q with Q.t >= 0 for all t
  double residual = 0.0;  // max-abs replay error (weights) or Q.(vecM - vecM') (separator)
  bool verified = false;
};

struct DominanceResult {
  bool dominates = false;
  ConeCertificate cert;
  std::size_t generators = 0;
};

struct UndominanceResult {
  bool undominated = true;
  std::optional<ConeCertificate> direction;
  std::optional<MatchingMeasure> improved;  // M plus the improving transfers
  double gain = 0.0;                        // total weight on strict transfers
  std::size_t generators = 0;
};

struct OrderOptions {
  double tol = 1e-9;
};

namespace detail {

struct TransferGrid {
  std::vector<AttrVector> xs, ys;
  std::vector<Couple> cells;  // xs x ys in lexicographic order

  std::size_t index(const AttrVector& x, const AttrVector& y) const {
    const auto i = std::lower_bound(xs.begin(), xs.end(), x) - xs.begin();
    const auto j = std::lower_bound(ys.begin(), ys.end(), y) - ys.begin();
    return static_cast<std::size_t>(i) * ys.size() + static_cast<std::size_t>(j);
  }

  std::vector<double> vec(const MatchingMeasure& M) const {
    std::vector<double> v(cells.size(), 0.0);
    for (const auto& [c, m] : M.cells()) v[index(c.x, c.y)] += m;
    return v;
  }
};

inline TransferGrid make_grid(const SupportGrid& g) {
  TransferGrid t{g.firms, g.workers, {}};
  for (const auto& x : t.xs)
    for (const auto& y : t.ys) t.cells.push_back({x, y});
  return t;
}

struct Generator {
  Transfer t;  // alpha unused
  bool strict = false;
  std::size_t gain[2];  // receiving cells
  std::size_t loss[2];  // losing cells
};

/// Every P,N concordance improving transfer between distinct grid rows and
/// columns, in lexicographic order.
inline std::vector<Generator> generators(const TransferGrid& g,
                                         const ComplementarityPattern& pattern) {
  std::vector<Generator> out;
  for (std::size_t a = 0; a < g.xs.size(); ++a)
    for (std::size_t b = a + 1; b < g.xs.size(); ++b)
      for (std::size_t c = 0; c < g.ys.size(); ++c)
        for (std::size_t d = c + 1; d < g.ys.size(); ++d)
          for (int flip = 0; flip < 2; ++flip) {
            const auto& x = g.xs[a];
            const auto& xp = g.xs[b];
            const auto& y = flip ? g.ys[d] : g.ys[c];
            const auto& yp = flip ? g.ys[c] : g.ys[d];
            const Transfer t{x, xp, y, yp, 0.0};
            if (!is_pn_improving(t, pattern)) continue;
            Generator gen{t, classify_pair({x, y}, {xp, yp}, pattern).pn_concordant, {}, {}};
            gen.gain[0] = g.index(x, y);
            gen.gain[1] = g.index(xp, yp);
            gen.loss[0] = g.index(x, yp);
            gen.loss[1] = g.index(xp, y);
            out.push_back(gen);
          }
  return out;
}

inline double generator_dot(const Generator& gen, const std::vector<double>& v) {
  return v[gen.gain[0]] + v[gen.gain[1]] - v[gen.loss[0]] - v[gen.loss[1]];
}

inline void same_marginals(const MatchingMeasure& M, const MatchingMeasure& Mp, double tol) {
  MarketInstance m{M.firm_marginal(), M.worker_marginal()};
  const auto rep = validate_matching(Mp, m, tol);
  if (!rep.ok()) throw DataError("marginal mismatch: " + rep.violations.front());
}

}  // namespace detail

/// Does M dominate Mp in the P,N modular order? Decided by whether
/// vec M - vec Mp is a nonnegative combination of transfer vectors.
inline DominanceResult dominates_pn(const MatchingMeasure& M, const MatchingMeasure& Mp,
                                    const ComplementarityPattern& pattern,
                                    const OrderOptions& opt = {}) {
  detail::same_marginals(M, Mp, opt.tol);
  const auto grid = detail::make_grid(SupportGrid::from_matchings({&M, &Mp}));
  if (!grid.xs.empty()) pattern.validate(grid.xs.front().size(), grid.ys.front().size());
  const auto gens = detail::generators(grid, pattern);
  const auto vm = grid.vec(M);
  const auto vp = grid.vec(Mp);
  std::vector<double> d(grid.cells.size());
  double scale = 1.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    d[k] = vm[k] - vp[k];
    scale = std::max({scale, std::abs(vm[k]), std::abs(vp[k])});
  }
  const double tol = opt.tol * scale;

  DominanceResult r;
  r.generators = gens.size();
  const bool zero = std::all_of(d.begin(), d.end(), [&](double v) { return std::abs(v) <= tol; });
  if (zero) {
    r.dominates = true;
    r.cert.verified = true;
    return r;
  }

  if (!gens.empty()) {
    // minimize sum(alpha) s.t. sum alpha_t t = d, alpha >= 0
    lp::Program prog;
    prog.n = gens.size();
    prog.c.assign(prog.n, 1.0);
    for (std::size_t k = 0; k < d.size(); ++k) {
      std::vector<double> row(prog.n, 0.0);
      for (std::size_t g = 0; g < gens.size(); ++g) {
        if (gens[g].gain[0] == k || gens[g].gain[1] == k) row[g] += 1.0;
        if (gens[g].loss[0] == k || gens[g].loss[1] == k) row[g] -= 1.0;
      }
      prog.add(std::move(row), lp::Sense::Equal, d[k]);
    }
    const auto res = lp::solve(prog, opt.tol);
    if (res.status == lp::Status::Optimal) {
      // Replay the weights on vec Mp and compare with vec M.
      auto replay = vp;
      for (std::size_t g = 0; g < gens.size(); ++g) {
        if (res.x[g] <= 0.0) continue;
        Transfer t = gens[g].t;
        t.alpha = res.x[g];
        r.cert.weights.push_back(t);
        replay[gens[g].gain[0]] += t.alpha;
        replay[gens[g].gain[1]] += t.alpha;
        replay[gens[g].loss[0]] -= t.alpha;
        replay[gens[g].loss[1]] -= t.alpha;
      }
      for (std::size_t k = 0; k < d.size(); ++k)
        r.cert.residual = std::max(r.cert.residual, std::abs(replay[k] - vm[k]));
      r.cert.verified = r.cert.residual <= 1e3 * tol;
      if (!r.cert.verified)
        throw NumericalError("dominance certificate failed replay (residual " +
                             format_number(r.cert.residual) + ")");
      r.dominates = true;
      return r;
    }
  }

  // Separation: a direction Q = s - 1 with s in [0,2] and Q.t >= 0 for every
  // generator that makes Q.d as small as possible (negative by Farkas).
  std::vector<double> q(d.size(), 0.0);
  if (gens.empty()) {
    for (std::size_t k = 0; k < d.size(); ++k) q[k] = d[k] > tol ? -1.0 : (d[k] < -tol ? 1.0 : 0.0);
  } else {
    lp::Program prog;
    prog.n = d.size();
    prog.c = d;
    for (const auto& gen : gens) {
      std::vector<double> row(prog.n, 0.0);
      row[gen.gain[0]] += 1.0;
      row[gen.gain[1]] += 1.0;
      row[gen.loss[0]] -= 1.0;
      row[gen.loss[1]] -= 1.0;
      prog.add(std::move(row), lp::Sense::GreaterEq, 0.0);
    }
    for (std::size_t k = 0; k < d.size(); ++k) {
      std::vector<double> row(prog.n, 0.0);
      row[k] = 1.0;
      prog.add(std::move(row), lp::Sense::LessEq, 2.0);
    }
    const auto res = lp::solve(prog, opt.tol);
    if (res.status != lp::Status::Optimal)
      throw NumericalError("separation problem did not solve");
    for (std::size_t k = 0; k < d.size(); ++k) q[k] = res.x[k] - 1.0;
  }
  double qd = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) qd += q[k] * d[k];
  bool cone_ok = true;
  for (const auto& gen : gens)
    if (detail::generator_dot(gen, q) < -1e3 * opt.tol) cone_ok = false;
  r.cert.residual = qd;
  r.cert.verified = cone_ok && qd < -tol;
  if (!r.cert.verified)
    throw NumericalError("dominance undecided: separating direction failed verification");
  std::map<Couple, double> table;
  for (std::size_t k = 0; k < d.size(); ++k) table[grid.cells[k]] = q[k];
  r.cert.separating_q = std::move(table);
  r.dominates = false;
  return r;
}

/// Is M undominated? Maximizes the weight on strict transfers that keep
/// M + sum alpha_t t nonnegative on the grid of M's marginal supports; M is
/// undominated iff that maximum is zero.
inline UndominanceResult is_undominated(const MatchingMeasure& M,
                                        const ComplementarityPattern& pattern,
                                        const OrderOptions& opt = {}) {
  const auto grid = detail::make_grid(SupportGrid::from_matching(M));
  if (!grid.xs.empty()) pattern.validate(grid.xs.front().size(), grid.ys.front().size());
  const auto gens = detail::generators(grid, pattern);
  UndominanceResult r;
  r.generators = gens.size();
  if (std::none_of(gens.begin(), gens.end(), [](const auto& g) { return g.strict; })) return r;

  const auto vm = grid.vec(M);
  double scale = 1.0;
  for (double v : vm) scale = std::max(scale, std::abs(v));
  lp::Program prog;
  prog.n = gens.size();
  prog.c.assign(prog.n, 0.0);
  for (std::size_t g = 0; g < gens.size(); ++g) prog.c[g] = gens[g].strict ? -1.0 : 0.0;
  for (std::size_t k = 0; k < vm.size(); ++k) {
    std::vector<double> row(prog.n, 0.0);
    for (std::size_t g = 0; g < gens.size(); ++g) {
      if (gens[g].gain[0] == k || gens[g].gain[1] == k) row[g] += 1.0;
      if (gens[g].loss[0] == k || gens[g].loss[1] == k) row[g] -= 1.0;
    }
    bool any = std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; });
    if (any) prog.add(std::move(row), lp::Sense::GreaterEq, -vm[k]);
  }
  const auto res = lp::solve(prog, opt.tol);
  if (res.status == lp::Status::Unbounded)
    throw NumericalError("undominance problem unbounded (strict transfer cycle)");
  if (res.status != lp::Status::Optimal) throw NumericalError("undominance problem infeasible");
  r.gain = -res.objective;
  if (r.gain <= opt.tol * scale) return r;

  ConeCertificate cert;
  auto replay = vm;
  for (std::size_t g = 0; g < gens.size(); ++g) {
    if (res.x[g] <= 0.0) continue;
    Transfer t = gens[g].t;
    t.alpha = res.x[g];
    cert.weights.push_back(t);
    replay[gens[g].gain[0]] += t.alpha;
    replay[gens[g].gain[1]] += t.alpha;
    replay[gens[g].loss[0]] -= t.alpha;
    replay[gens[g].loss[1]] -= t.alpha;
  }
  double worst = 0.0;
  for (double v : replay) worst = std::min(worst, v);
  cert.residual = -worst;
  cert.verified = worst >= -1e3 * opt.tol * scale;
  if (!cert.verified)
    throw NumericalError("improving direction failed replay (negative mass " +
                         format_number(worst) + ")");
  MatchingMeasure improved(M.firm_dim(), M.worker_dim());
  for (std::size_t k = 0; k < replay.size(); ++k)
    if (replay[k] > opt.tol * scale) improved.add(grid.cells[k].x, grid.cells[k].y, replay[k]);
  r.undominated = false;
  r.direction = std::move(cert);
  r.improved = std::move(improved);
  return r;
}

}  // namespace mmatch
