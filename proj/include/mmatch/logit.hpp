#pragma once

// Logit matching equilibrium with Gumbel unobserved heterogeneity, computed by
// iterative proportional fitting, plus the log-odds identification checks and
// the concordance comparative statics built on it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmatch/market.hpp"
#include "mmatch/modularity.hpp"
#include "mmatch/sorting.hpp"

namespace mmatch {

struct LogitConfig {
  double sigma_delta = 1.0;  // sum of the two Gumbel scale parameters
  double ipf_tol = 1e-12;    // max absolute marginal deviation at convergence
  long max_iters = 100000;

  void validate() const {
    if (!(sigma_delta > 0.0) || !std::isfinite(sigma_delta))
      throw UsageError("sigma_delta must be positive, got " + format_number(sigma_delta));
    if (!(ipf_tol > 0.0)) throw UsageError("ipf_tol must be positive");
    if (max_iters <= 0) throw UsageError("max_iters must be positive");
  }
};

struct LogitSolution {
  MatchingMeasure density;              // total mass 1, positive on every cell
  std::map<Couple, double> log_density;
  std::vector<AttrVector> firms, workers;
  std::map<AttrVector, double> firm_potential;    // phi, zero at the first firm type
  std::map<AttrVector, double> worker_potential;  // varphi, zero at the first worker type
  double normalizer = 0.0;                        // W
  double sigma_delta = 1.0;
  long iterations = 0;
  double max_marginal_error = 0.0;
  std::vector<std::string> warnings;

  double log_mass(const AttrVector& x, const AttrVector& y) const {
    auto it = log_density.find(Couple{x, y});
    if (it == log_density.end())
      throw DataError("type pair " + to_string(Couple{x, y}) + " outside the solution support");
    return it->second;
  }

  SupportGrid grid() const { return {firms, workers}; }
};

namespace detail {

inline std::vector<Atom> normalized_atoms(const DiscreteMeasure& d, const char* side,
                                          std::vector<std::string>& warnings) {
  std::vector<Atom> atoms;
  for (const auto& a : d.merged().atoms) {
    if (!(a.mass >= 0.0) || !std::isfinite(a.mass))
      throw DataError(std::string("negative mass ") + format_number(a.mass) + " at " + side +
                      " type " + to_string(a.attrs));
    if (a.mass > 0.0) atoms.push_back(a);
  }
  if (atoms.empty()) throw DataError(std::string(side) + " distribution is empty");
  double total = 0.0;
  for (const auto& a : atoms) total += a.mass;
  if (std::abs(total - 1.0) > 1e-12) {
    warnings.push_back(std::string(side) + " distribution normalized from total " +
                       format_number(total));
    for (auto& a : atoms) a.mass /= total;
  }
  return atoms;
}

}  // namespace detail

/// Alternating row/column scaling of the kernel exp{(Q - max Q)/sigma_delta}
/// until both marginals match pF and pG.
inline LogitSolution ipf_equilibrium(const OutputSpec& Q, const DiscreteMeasure& pF,
                                     const DiscreteMeasure& pG, const LogitConfig& cfg = {}) {
  cfg.validate();
  LogitSolution sol;
  sol.sigma_delta = cfg.sigma_delta;
  const auto fs = detail::normalized_atoms(pF, "firm", sol.warnings);
  const auto ws = detail::normalized_atoms(pG, "worker", sol.warnings);
  const std::size_t nf = fs.size(), nw = ws.size();

  std::vector<double> q(nf * nw);
  double qmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nf; ++i)
    for (std::size_t j = 0; j < nw; ++j) {
      const double v = Q(fs[i].attrs, ws[j].attrs);
      if (!std::isfinite(v))
        throw NumericalError("kernel overflow: Q=" + format_number(v) + " at " +
                             to_string(Couple{fs[i].attrs, ws[j].attrs}));
      q[i * nw + j] = v;
      qmax = std::max(qmax, v);
    }
  std::vector<double> K(nf * nw);
  for (std::size_t k = 0; k < K.size(); ++k) {
    const double e = (q[k] - qmax) / cfg.sigma_delta;
    K[k] = std::exp(e);
    if (!(K[k] > std::numeric_limits<double>::min()))
      throw NumericalError("kernel underflow: Q=" + format_number(q[k]) + " is " +
                           format_number(qmax - q[k]) + " below the maximum");
  }

  std::vector<double> a(nf, 1.0), b(nw, 1.0);
  double err = std::numeric_limits<double>::infinity();
  long it = 0;
  while (it < cfg.max_iters) {
    ++it;
    for (std::size_t i = 0; i < nf; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < nw; ++j) s += K[i * nw + j] * b[j];
      a[i] = fs[i].mass / s;
    }
    for (std::size_t j = 0; j < nw; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < nf; ++i) s += K[i * nw + j] * a[i];
      b[j] = ws[j].mass / s;
    }
    // Columns are exact after the column pass; rows carry the residual.
    err = 0.0;
    for (std::size_t i = 0; i < nf; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < nw; ++j) s += K[i * nw + j] * a[i] * b[j];
      err = std::max(err, std::abs(s - fs[i].mass));
    }
    if (err < cfg.ipf_tol) break;
  }
  if (!(err < cfg.ipf_tol))
    throw NumericalError("IPF did not converge in " + std::to_string(cfg.max_iters) +
                         " iterations (marginal error " + format_number(err) + ")");

  sol.iterations = it;
  sol.max_marginal_error = err;
  sol.density = MatchingMeasure(pF.dimension, pG.dimension);
  for (const auto& f : fs) sol.firms.push_back(f.attrs);
  for (const auto& w : ws) sol.workers.push_back(w.attrs);
  const double la1 = std::log(a[0]);
  const double lb1 = std::log(b[0]);
  for (std::size_t i = 0; i < nf; ++i)
    sol.firm_potential[fs[i].attrs] = cfg.sigma_delta * (std::log(a[i]) - la1);
  for (std::size_t j = 0; j < nw; ++j)
    sol.worker_potential[ws[j].attrs] = cfg.sigma_delta * (std::log(b[j]) - lb1);
  sol.normalizer = la1 + lb1 - qmax / cfg.sigma_delta;
  for (std::size_t i = 0; i < nf; ++i)
    for (std::size_t j = 0; j < nw; ++j) {
      const double lm = std::log(a[i]) + std::log(b[j]) + (q[i * nw + j] - qmax) / cfg.sigma_delta;
      sol.log_density[{fs[i].attrs, ws[j].attrs}] = lm;
      sol.density.add(fs[i].attrs, ws[j].attrs, std::exp(lm));
    }
  return sol;
}

/// log{m(x,y) m(x',y') / (m(x',y) m(x,y'))}.
inline double double_difference(const LogitSolution& sol, const AttrVector& x,
                                 const AttrVector& xp, const AttrVector& y, const AttrVector& yp) {
  return sol.log_mass(x, y) + sol.log_mass(xp, yp) - sol.log_mass(xp, y) - sol.log_mass(x, yp);
}

/// The log density as a tabulated output function on the solution grid.
inline OutputSpec log_density_spec(const LogitSolution& sol) {
  return OutputSpec::tabulated(sol.log_density);
}

struct LogModularityCheck {
  bool holds = true;
  std::optional<std::pair<int, int>> failing_pair;
  std::optional<Quadruple> witness;
  PatternClassification classification;  // of the log density itself
};

/// Is the log density P,N modular for `pattern` (supermodular on P,
/// submodular on N, modular elsewhere, up to `zero_tol`)?
inline LogModularityCheck check_log_pn(const LogitSolution& sol,
                                       const ComplementarityPattern& pattern,
                                       double zero_tol = 1e-9) {
  const auto grid = sol.grid();
  pattern.validate(grid.firm_dim(), grid.worker_dim());
  const auto logm = log_density_spec(sol);
  ModularityOptions opt;
  opt.zero_tol = zero_tol;
  opt.strict_margin = zero_tol;
  LogModularityCheck r;
  r.classification = classify_pn(logm, grid, opt);
  const int K = static_cast<int>(grid.firm_dim());
  const int L = static_cast<int>(grid.worker_dim());
  for (int i = 1; i <= K && r.holds; ++i)
    for (int j = 1; j <= L && r.holds; ++j) {
      const auto v = check_pairwise(logm, i, j, grid, opt);
      bool ok;
      if (pattern.P.count({i, j}))
        ok = v.supermodular;
      else if (pattern.N.count({i, j}))
        ok = v.submodular;
      else
        ok = v.modular();
      if (!ok) {
        r.holds = false;
        r.failing_pair = std::make_pair(i, j);
        r.witness = v.witness;
      }
    }
  return r;
}

/// Log local odds ratio of cells (i,j),(i+1,j+1) against (i+1,j),(i,j+1);
/// indices are 1-based.
inline double local_log_odds(const BivariateTable& t, int i, int j) {
  if (i < 1 || j < 1 || static_cast<std::size_t>(i) >= t.rows.size() ||
      static_cast<std::size_t>(j) >= t.cols.size())
    throw DataError("local odds index (" + std::to_string(i) + "," + std::to_string(j) +
                    ") out of range");
  const double m00 = t.mass[i - 1][j - 1], m11 = t.mass[i][j];
  const double m10 = t.mass[i][j - 1], m01 = t.mass[i - 1][j];
  if (!(m00 > 0.0 && m11 > 0.0 && m10 > 0.0 && m01 > 0.0))
    throw DataError("local odds undefined: zero cell around (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
  return std::log(m00) + std::log(m11) - std::log(m10) - std::log(m01);
}

struct ConcordanceFractions {
  double pn = 0.0;  // mass of P,N concordant ordered pairs of independent draws
  double np = 0.0;  // mass of N,P concordant ordered pairs

  double ratio() const {
    return np > 0.0 ? pn / np : std::numeric_limits<double>::infinity();
  }
};

inline ConcordanceFractions concordance_fractions(const MatchingMeasure& density,
                                                  const ComplementarityPattern& pattern) {
  ConcordanceFractions f;
  const double total = density.total();
  for (const auto& [c1, m1] : density.cells())
    for (const auto& [c2, m2] : density.cells()) {
      const auto pc = classify_pair(c1, c2, pattern);
      if (pc.pn_concordant) f.pn += m1 * m2;
      if (pc.np_concordant) f.np += m1 * m2;
    }
  if (total > 0.0) {
    f.pn /= total * total;
    f.np /= total * total;
  }
  return f;
}

struct ComparativeStaticsReport {
  ConcordanceFractions before;  // under Q
  ConcordanceFractions after;   // under Qp, the P,N modular increase
  bool ratio_weakly_rises = false;
  bool ratio_strictly_rises = false;
  bool pn_rises = false;            // P,N fraction weakly larger under Qp
  bool np_falls = false;            // N,P fraction weakly smaller under Qp
  bool local_odds_monotone = true;  // every P,N concordant log odds ratio weakly rises
  std::optional<Quadruple> local_odds_witness;
};

/// Solves both equilibria and compares their P,N-to-N,P concordance ratios.
/// Requires Qp to exhibit higher P,N modularity than Q on the support grid.
inline ComparativeStaticsReport comparative_statics(const OutputSpec& Q, const OutputSpec& Qp,
                                                    const DiscreteMeasure& pF,
                                                    const DiscreteMeasure& pG,
                                                    const ComplementarityPattern& pattern,
                                                    const LogitConfig& cfg = {},
                                                    double tol = 1e-10) {
  const auto s0 = ipf_equilibrium(Q, pF, pG, cfg);
  const auto s1 = ipf_equilibrium(Qp, pF, pG, cfg);
  const auto grid = s0.grid();
  pattern.validate(grid.firm_dim(), grid.worker_dim());
  if (!compare_modularity(Qp, Q, pattern, grid).higher)
    throw DataError("second output function is not a P,N modular increase of the first");

  ComparativeStaticsReport r;
  r.before = concordance_fractions(s0.density, pattern);
  r.after = concordance_fractions(s1.density, pattern);
  const double r0 = r.before.ratio(), r1 = r.after.ratio();
  const double slack = tol * std::max(1.0, std::isfinite(r0) ? std::abs(r0) : 1.0);
  r.ratio_weakly_rises = r1 >= r0 - slack;
  r.ratio_strictly_rises = r1 > r0 + slack;
  r.pn_rises = r.after.pn >= r.before.pn - tol;
  r.np_falls = r.after.np <= r.before.np + tol;

  for (const auto& x : grid.firms)
    for (const auto& xp : grid.firms)
      for (const auto& y : grid.workers)
        for (const auto& yp : grid.workers) {
          if (!classify_pair({x, y}, {xp, yp}, pattern).pn_concordant) continue;
          if (double_difference(s1, x, xp, y, yp) < double_difference(s0, x, xp, y, yp) - 1e-8 &&
              r.local_odds_monotone) {
            r.local_odds_monotone = false;
            r.local_odds_witness = Quadruple{x, xp, y, yp};
          }
        }
  return r;
}

}  // namespace mmatch
