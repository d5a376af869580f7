#pragma once

// Concordance of couple pairs, the global / within-group / weak sorting
// checks, concordance-improving transfers, and the existence search for
// globally sorted couplings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmatch/flow.hpp"
#include "mmatch/market.hpp"

namespace mmatch {

struct PairClass {
  bool pn_weak_concordant = false;
  bool pn_concordant = false;
  bool np_weak_concordant = false;
  bool np_concordant = false;
};

namespace detail {

inline void check_pattern_dims(const Couple& c, const ComplementarityPattern& pattern) {
  auto bad = [&](const std::pair<int, int>& p) {
    return p.first < 1 || p.second < 1 || static_cast<std::size_t>(p.first) > c.x.size() ||
           static_cast<std::size_t>(p.second) > c.y.size();
  };
  for (const auto& p : pattern.P)
    if (bad(p))
      throw DataError("pattern index (" + std::to_string(p.first) + "," +
                      std::to_string(p.second) + ") exceeds couple dimensions");
  for (const auto& p : pattern.N)
    if (bad(p))
      throw DataError("pattern index (" + std::to_string(p.first) + "," +
                      std::to_string(p.second) + ") exceeds couple dimensions");
}

}  // namespace detail

/// Classifies the pair of couples c1=(x,y), c2=(x',y') under `pattern`.
/// A product (x_i-x'_i)(y_j-y'_j) with |.| <= tol counts as zero.
inline PairClass classify_pair(const Couple& c1, const Couple& c2,
                               const ComplementarityPattern& pattern, double tol = 0.0) {
  if (c1.x.size() != c2.x.size() || c1.y.size() != c2.y.size())
    throw DataError("couples " + to_string(c1) + " and " + to_string(c2) +
                    " have different dimensions");
  detail::check_pattern_dims(c1, pattern);
  auto prod = [&](const std::pair<int, int>& p) {
    return (c1.x[p.first - 1] - c2.x[p.first - 1]) * (c1.y[p.second - 1] - c2.y[p.second - 1]);
  };
  // "pos" collects the sign information in the P,N orientation: products on P
  // and negated products on N.
  bool any_neg = false, any_pos = false;
  for (const auto& p : pattern.P) {
    const double v = prod(p);
    if (v < -tol) any_neg = true;
    if (v > tol) any_pos = true;
  }
  for (const auto& p : pattern.N) {
    const double v = -prod(p);
    if (v < -tol) any_neg = true;
    if (v > tol) any_pos = true;
  }
  PairClass r;
  r.pn_weak_concordant = !any_neg;
  r.pn_concordant = !any_neg && any_pos;
  r.np_weak_concordant = !any_pos;
  r.np_concordant = !any_pos && any_neg;
  return r;
}

struct SortingCheck {
  bool holds = true;
  std::optional<std::pair<Couple, Couple>> witness;  // lexicographically smallest violation
  double mass_tol = 0.0;                              // cells with mass > tol are support
};

/// Global P,N sorting: every pair of support cells is P,N weak concordant.
inline SortingCheck check_global_pn(const MatchingMeasure& M, const ComplementarityPattern& pattern,
                                    double mass_tol = 0.0) {
  SortingCheck r;
  r.mass_tol = mass_tol;
  const auto s = M.support(mass_tol);
  for (std::size_t a = 0; a < s.size() && r.holds; ++a)
    for (std::size_t b = a + 1; b < s.size(); ++b)
      if (!classify_pair(s[a], s[b], pattern).pn_weak_concordant) {
        r.holds = false;
        r.witness = std::make_pair(s[a], s[b]);
        break;
      }
  return r;
}

/// Weak P,N sorting: no pair of support cells is N,P concordant.
inline SortingCheck check_weak_pn(const MatchingMeasure& M, const ComplementarityPattern& pattern,
                                  double mass_tol = 0.0) {
  SortingCheck r;
  r.mass_tol = mass_tol;
  const auto s = M.support(mass_tol);
  for (std::size_t a = 0; a < s.size() && r.holds; ++a)
    for (std::size_t b = a + 1; b < s.size(); ++b)
      if (classify_pair(s[a], s[b], pattern).np_concordant) {
        r.holds = false;
        r.witness = std::make_pair(s[a], s[b]);
        break;
      }
  return r;
}

/// Within-group P,N sorting: for each (i,j) in P (resp. N), support pairs that
/// agree on every firm attribute but i and every worker attribute but j must
/// be positively (resp. negatively) sorted on (i,j). `freeze_tol` is the
/// tolerance for "agree"; the default is exact equality.
inline SortingCheck check_within_group(const MatchingMeasure& M,
                                       const ComplementarityPattern& pattern,
                                       double mass_tol = 0.0, double freeze_tol = 0.0) {
  SortingCheck r;
  r.mass_tol = mass_tol;
  const auto s = M.support(mass_tol);
  if (!s.empty()) detail::check_pattern_dims(s.front(), pattern);
  auto frozen_equal = [&](const Couple& a, const Couple& b, int i, int j) {
    for (std::size_t k = 0; k < a.x.size(); ++k)
      if (static_cast<int>(k) != i - 1 && std::abs(a.x[k] - b.x[k]) > freeze_tol) return false;
    for (std::size_t l = 0; l < a.y.size(); ++l)
      if (static_cast<int>(l) != j - 1 && std::abs(a.y[l] - b.y[l]) > freeze_tol) return false;
    return true;
  };
  for (std::size_t a = 0; a < s.size() && r.holds; ++a)
    for (std::size_t b = a + 1; b < s.size(); ++b) {
      bool bad = false;
      for (const auto& [i, j] : pattern.P)
        if (frozen_equal(s[a], s[b], i, j) &&
            (s[b].x[i - 1] - s[a].x[i - 1]) * (s[b].y[j - 1] - s[a].y[j - 1]) < 0.0)
          bad = true;
      for (const auto& [p, q] : pattern.N)
        if (frozen_equal(s[a], s[b], p, q) &&
            (s[b].x[p - 1] - s[a].x[p - 1]) * (s[b].y[q - 1] - s[a].y[q - 1]) > 0.0)
          bad = true;
      if (bad) {
        r.holds = false;
        r.witness = std::make_pair(s[a], s[b]);
        break;
      }
    }
  return r;
}

/// Uniform transfer of `alpha` from the corners (x,y'),(x',y) to the corners
/// (x,y),(x',y').
struct Transfer {
  AttrVector x, xp, y, yp;
  double alpha = 0.0;
};

inline Transfer make_transfer(AttrVector x, AttrVector xp, AttrVector y, AttrVector yp,
                              double alpha) {
  return {std::move(x), std::move(xp), std::move(y), std::move(yp), alpha};
}

/// Is `t` a P,N concordance improving transfer (receiving pair P,N weak
/// concordant, losing pair N,P weak concordant)?
inline bool is_pn_improving(const Transfer& t, const ComplementarityPattern& pattern) {
  return classify_pair({t.x, t.y}, {t.xp, t.yp}, pattern).pn_weak_concordant &&
         classify_pair({t.x, t.yp}, {t.xp, t.y}, pattern).np_weak_concordant;
}

inline MatchingMeasure apply_transfer(const MatchingMeasure& M, const Transfer& t,
                                      double tol = 1e-12) {
  if (t.alpha < 0.0) throw DataError("transfer mass " + format_number(t.alpha) + " is negative");
  if (t.alpha == 0.0) return M;
  for (const auto& [x, y] : {std::pair{t.x, t.yp}, std::pair{t.xp, t.y}}) {
    const double have = M.mass(x, y);
    if (have < t.alpha - tol)
      throw DataError("insufficient mass " + format_number(have) + " at losing corner " +
                      to_string(Couple{x, y}) + " for transfer of " + format_number(t.alpha));
  }
  MatchingMeasure out = M;
  out.add(t.x, t.y, t.alpha);
  out.add(t.xp, t.yp, t.alpha);
  // Losing corners are set rather than decremented when they would land
  // within tolerance of zero so that no -0/epsilon cells linger.
  for (const auto& [x, y] : {std::pair{t.x, t.yp}, std::pair{t.xp, t.y}}) {
    const double left = out.mass(x, y) - t.alpha;
    out.set(x, y, std::abs(left) <= tol ? 0.0 : left);
  }
  return out;
}

enum class SearchStatus { Exists, DoesNotExist, Inconclusive };

inline const char* to_string(SearchStatus s) {
  switch (s) {
    case SearchStatus::Exists: return "exists";
    case SearchStatus::DoesNotExist: return "does_not_exist";
    case SearchStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct GlobalSortingSearch {
  SearchStatus status = SearchStatus::Inconclusive;
  std::optional<MatchingMeasure> witness;
  std::size_t nodes = 0;
  std::size_t cliques_checked = 0;
};

namespace detail {

/// Bron-Kerbosch with pivoting over a small dense compatibility graph.
class CliqueSearch {
 public:
  CliqueSearch(const std::vector<std::vector<char>>& adj, std::size_t budget)
      : adj_(adj), budget_(budget) {}

  /// Calls `visit(clique)` for every maximal clique until it returns true
  /// (stop) or the node budget runs out. Returns false on budget exhaustion.
  template <typename Visit>
  bool run(Visit&& visit) {
    std::vector<int> R, P, X;
    for (int v = 0; v < static_cast<int>(adj_.size()); ++v) P.push_back(v);
    stopped_ = false;
    exhausted_ = false;
    expand(R, P, X, visit);
    return !exhausted_;
  }

  std::size_t nodes() const { return nodes_; }
  bool stopped() const { return stopped_; }

 private:
  template <typename Visit>
  void expand(std::vector<int>& R, std::vector<int> P, std::vector<int> X, Visit& visit) {
    if (stopped_ || exhausted_) return;
    if (++nodes_ > budget_) {
      exhausted_ = true;
      return;
    }
    if (P.empty()) {
      if (X.empty() && visit(R)) stopped_ = true;
      return;
    }
    int pivot = P.front();
    std::size_t best = 0;
    for (const auto& cand : {P, X})
      for (int u : cand) {
        std::size_t c = 0;
        for (int v : P) c += adj_[u][v] ? 1 : 0;
        if (c >= best) {
          best = c;
          pivot = u;
        }
      }
    const std::vector<int> order = P;
    for (int v : order) {
      if (adj_[pivot][v]) continue;
      std::vector<int> P2, X2;
      for (int u : P)
        if (adj_[v][u]) P2.push_back(u);
      for (int u : X)
        if (adj_[v][u]) X2.push_back(u);
      R.push_back(v);
      expand(R, P2, X2, visit);
      R.pop_back();
      if (stopped_ || exhausted_) return;
      P.erase(std::find(P.begin(), P.end(), v));
      X.push_back(v);
    }
  }

  const std::vector<std::vector<char>>& adj_;
  std::size_t budget_;
  std::size_t nodes_ = 0;
  bool stopped_ = false;
  bool exhausted_ = false;
};

}  // namespace detail

/// Decides whether some coupling of the market has a pairwise P,N weak
/// concordant support. Any such support is a clique of the compatibility graph
/// on type cells, hence lies inside a maximal clique; each maximal clique is
/// tested for a feasible transportation plan by maximum flow.
inline GlobalSortingSearch exists_global_pn(const MarketInstance& m,
                                            const ComplementarityPattern& pattern,
                                            std::size_t budget = 1000000, double tol = 1e-9) {
  const auto rep = validate_market(m, tol);
  if (!rep.ok()) throw DataError("invalid market: " + rep.violations.front());
  pattern.validate(m.firms.dimension, m.workers.dimension);

  const auto F = m.firms.merged();
  const auto G = m.workers.merged();
  std::vector<Atom> fs, ws;
  for (const auto& a : F.atoms)
    if (a.mass > 0.0) fs.push_back(a);
  for (const auto& a : G.atoms)
    if (a.mass > 0.0) ws.push_back(a);

  GlobalSortingSearch out;
  if (fs.empty() || ws.empty()) {
    out.status = SearchStatus::Exists;
    out.witness = MatchingMeasure(m.firms.dimension, m.workers.dimension);
    return out;
  }

  std::vector<Couple> cells;
  for (const auto& f : fs)
    for (const auto& w : ws) cells.push_back({f.attrs, w.attrs});
  const int n = static_cast<int>(cells.size());
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      adj[a][b] = adj[b][a] = classify_pair(cells[a], cells[b], pattern).pn_weak_concordant;

  const double total = F.total_mass();
  const int nf = static_cast<int>(fs.size());
  const int nw = static_cast<int>(ws.size());

  auto feasible = [&](const std::vector<int>& clique) -> bool {
    ++out.cliques_checked;
    std::vector<char> fcov(nf, 0), wcov(nw, 0);
    for (int c : clique) {
      fcov[c / nw] = 1;
      wcov[c % nw] = 1;
    }
    if (std::count(fcov.begin(), fcov.end(), 0) || std::count(wcov.begin(), wcov.end(), 0))
      return false;
    const int S = nf + nw, T = S + 1;
    flow::MaxFlow<double> mf(nf + nw + 2, 1e-14 * std::max(1.0, total));
    for (int i = 0; i < nf; ++i) mf.add_edge(S, i, fs[i].mass);
    for (int j = 0; j < nw; ++j) mf.add_edge(nf + j, T, ws[j].mass);
    std::vector<std::pair<int, int>> arcs;
    for (int c : clique) arcs.emplace_back(c, mf.add_edge(c / nw, nf + c % nw, total));
    const double sent = mf.run(S, T);
    if (!masses_equal(sent, total, tol)) return false;
    MatchingMeasure W(m.firms.dimension, m.workers.dimension);
    for (const auto& [c, idx] : arcs) {
      const double v = mf.flow_on(c / nw, idx);
      if (v > 0.0) W.add(cells[c].x, cells[c].y, v);
    }
    out.witness = std::move(W);
    return true;
  };

  detail::CliqueSearch search(adj, budget);
  const bool complete = search.run(feasible);
  out.nodes = search.nodes();
  if (search.stopped())
    out.status = SearchStatus::Exists;
  else
    out.status = complete ? SearchStatus::DoesNotExist : SearchStatus::Inconclusive;
  return out;
}

}  // namespace mmatch
