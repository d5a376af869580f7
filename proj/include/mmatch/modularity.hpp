#pragma once

// Pairwise super/submodularity of output functions on a finite support grid,
// P,N modularity classification, and the "higher P,N modularity" comparison.

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mmatch/market.hpp"
#include "mmatch/sorting.hpp"

namespace mmatch {

/// Firm pair (x, xp) and worker pair (y, yp) spanning one double difference.
struct Quadruple {
  AttrVector x, xp, y, yp;
};

inline std::string to_string(const Quadruple& q) {
  return "x=" + to_string(q.x) + " x'=" + to_string(q.xp) + " y=" + to_string(q.y) +
         " y'=" + to_string(q.yp);
}

/// Q(x',y') - Q(x,y') - Q(x',y) + Q(x,y).
inline double cross_difference(const OutputSpec& Q, const AttrVector& x, const AttrVector& xp,
                               const AttrVector& y, const AttrVector& yp) {
  return Q(xp, yp) - Q(x, yp) - Q(xp, y) + Q(x, y);
}

struct ModularityOptions {
  double strict_margin = 0.0;  // strict means double difference > margin
  double zero_tol = 1e-12;     // |dd| <= zero_tol counts as zero
};

struct PairwiseVerdict {
  bool supermodular = true;
  bool strictly_supermodular = false;
  bool submodular = true;
  bool strictly_submodular = false;
  bool degenerate = false;  // no quadruple tested: verdict is vacuous
  std::size_t quadruples = 0;
  std::optional<Quadruple> witness;  // first quadruple at which the sign switches

  bool modular() const { return supermodular && submodular; }
};

namespace detail {

/// Indices of pairs (a, b) of grid points with p[b][idx] > p[a][idx] and all
/// other coordinates equal, in lexicographic order of (p[a], p[b]).
inline std::vector<std::pair<std::size_t, std::size_t>> axis_moves(
    const std::vector<AttrVector>& pts, std::size_t idx) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = 0; b < pts.size(); ++b) {
      if (!(pts[b][idx] > pts[a][idx])) continue;
      bool same = true;
      for (std::size_t k = 0; k < pts[a].size() && same; ++k)
        if (k != idx && pts[a][k] != pts[b][k]) same = false;
      if (same) out.emplace_back(a, b);
    }
  return out;
}

inline void check_index(int i, std::size_t dim, const char* side) {
  if (i < 1 || static_cast<std::size_t>(i) > dim)
    throw DataError(std::string(side) + " attribute index " + std::to_string(i) +
                    " out of range [1," + std::to_string(dim) + "]");
}

}  // namespace detail

/// Signs of the (i,j) double difference over every grid quadruple that moves
/// firm attribute i and worker attribute j while freezing all others.
/// Indices are 1-based.
inline PairwiseVerdict check_pairwise(const OutputSpec& Q, int i, int j, const SupportGrid& grid,
                                      const ModularityOptions& opt = {}) {
  detail::check_index(i, grid.firm_dim(), "firm");
  detail::check_index(j, grid.worker_dim(), "worker");
  const auto xm = detail::axis_moves(grid.firms, static_cast<std::size_t>(i - 1));
  const auto ym = detail::axis_moves(grid.workers, static_cast<std::size_t>(j - 1));

  PairwiseVerdict v;
  bool all_pos = true, all_neg = true;
  for (const auto& [a, b] : xm)
    for (const auto& [c, d] : ym) {
      const auto& x = grid.firms[a];
      const auto& xp = grid.firms[b];
      const auto& y = grid.workers[c];
      const auto& yp = grid.workers[d];
      const double dd = cross_difference(Q, x, xp, y, yp);
      ++v.quadruples;
      if (!(dd > opt.strict_margin)) all_pos = false;
      if (!(dd < -opt.strict_margin)) all_neg = false;
      const bool sup_fails = dd < -opt.zero_tol;
      const bool sub_fails = dd > opt.zero_tol;
      if (sup_fails) v.supermodular = false;
      if (sub_fails) v.submodular = false;
      if (!v.supermodular && !v.submodular && !v.witness) v.witness = Quadruple{x, xp, y, yp};
    }
  v.degenerate = v.quadruples == 0;
  v.strictly_supermodular = !v.degenerate && all_pos;
  v.strictly_submodular = !v.degenerate && all_neg;
  return v;
}

struct PatternViolation {
  int i = 0, j = 0;
  Quadruple witness;
};

struct PatternClassification {
  ComplementarityPattern pattern;
  std::set<std::pair<int, int>> strict;
  std::vector<PatternViolation> violations;    // sign changes
  std::vector<std::pair<int, int>> degenerate;  // vacuously modular pairs
};

/// P = pairs supermodular but not modular, N = submodular but not modular.
inline PatternClassification classify_pn(const OutputSpec& Q, const SupportGrid& grid,
                                         const ModularityOptions& opt = {}) {
  PatternClassification out;
  const int K = static_cast<int>(grid.firm_dim());
  const int L = static_cast<int>(grid.worker_dim());
  for (int i = 1; i <= K; ++i)
    for (int j = 1; j <= L; ++j) {
      const auto v = check_pairwise(Q, i, j, grid, opt);
      if (v.degenerate) out.degenerate.emplace_back(i, j);
      if (v.modular()) continue;
      if (v.supermodular) {
        out.pattern.P.emplace(i, j);
        if (v.strictly_supermodular) out.strict.emplace(i, j);
      } else if (v.submodular) {
        out.pattern.N.emplace(i, j);
        if (v.strictly_submodular) out.strict.emplace(i, j);
      } else {
        out.violations.push_back({i, j, *v.witness});
      }
    }
  return out;
}

/// True when a quadratic or tabulated Q carries the sign structure `pattern`:
/// supermodular on P, submodular on N, modular elsewhere.
inline bool is_pn_modular(const OutputSpec& Q, const ComplementarityPattern& pattern,
                          const SupportGrid& grid, bool strict = false,
                          const ModularityOptions& opt = {}) {
  const int K = static_cast<int>(grid.firm_dim());
  const int L = static_cast<int>(grid.worker_dim());
  for (int i = 1; i <= K; ++i)
    for (int j = 1; j <= L; ++j) {
      const auto v = check_pairwise(Q, i, j, grid, opt);
      if (pattern.P.count({i, j})) {
        if (!v.supermodular || (strict && !v.strictly_supermodular)) return false;
      } else if (pattern.N.count({i, j})) {
        if (!v.submodular || (strict && !v.strictly_submodular)) return false;
      } else if (!v.modular()) {
        return false;
      }
    }
  return true;
}

struct ModularityComparison {
  bool higher = true;
  std::optional<Quadruple> witness;  // concordant pair where the inequality fails
  std::size_t pairs_tested = 0;
  std::optional<bool> coefficient_test;  // quadratic-only coefficient criterion
  bool agreement = true;                 // grid test equals coefficient test
};


/// Does Q exhibit higher P,N modularity than Qp on the grid? For two quadratic
/// specs the coefficient criterion (theta >= beta on P, <= on N, equal
/// elsewhere) is evaluated too, and `agreement` records whether both agree.
inline ModularityComparison compare_modularity(const OutputSpec& Q, const OutputSpec& Qp,
                                               const ComplementarityPattern& pattern,
                                               const SupportGrid& grid, double tol = 1e-12) {
  pattern.validate(grid.firm_dim(), grid.worker_dim());
  ModularityComparison r;
  for (const auto& x : grid.firms)
    for (const auto& xp : grid.firms)
      for (const auto& y : grid.workers)
        for (const auto& yp : grid.workers) {
          if (!classify_pair({x, y}, {xp, yp}, pattern).pn_concordant) continue;
          ++r.pairs_tested;
          const double lhs = Q(x, y) + Q(xp, yp) - Q(xp, y) - Q(x, yp);
          const double rhs = Qp(x, y) + Qp(xp, yp) - Qp(xp, y) - Qp(x, yp);
          if (lhs < rhs - tol * std::max(1.0, std::abs(rhs))) {
            if (!r.witness) r.witness = Quadruple{x, xp, y, yp};
            r.higher = false;
          }
        }
  if (Q.is_quadratic() && Qp.is_quadratic()) {
    const auto& th = Q.theta();
    const auto& be = Qp.theta();
    bool ok = th.size() == be.size();
    for (std::size_t k = 0; ok && k < th.size(); ++k) {
      if (th[k].size() != be[k].size()) {
        ok = false;
        break;
      }
      for (std::size_t l = 0; l < th[k].size(); ++l) {
        const std::pair<int, int> kl{static_cast<int>(k + 1), static_cast<int>(l + 1)};
        if (pattern.P.count(kl)) {
          if (th[k][l] < be[k][l]) ok = false;
        } else if (pattern.N.count(kl)) {
          if (th[k][l] > be[k][l]) ok = false;
        } else if (th[k][l] != be[k][l]) {
          ok = false;
        }
      }
    }
    r.coefficient_test = ok;
    r.agreement = ok == r.higher;
  }
  return r;
}

}  // namespace mmatch
