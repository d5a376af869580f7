#pragma once

// Core data model: finitely supported type distributions, matching measures,
// complementarity patterns and output functions.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mmatch/error.hpp"

namespace mmatch {

using AttrVector = std::vector<double>;
using Matrix = std::vector<std::vector<double>>;

inline std::string to_string(const AttrVector& v) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  os << ')';
  return os.str();
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

struct Atom {
  AttrVector attrs;
  double mass = 0.0;
};

/// A finitely supported measure over attribute vectors of a fixed dimension.
/// Atoms may arrive unsorted or duplicated; `merged()` yields the canonical
/// form (sorted, duplicates summed).
struct DiscreteMeasure {
  std::vector<Atom> atoms;
  std::size_t dimension = 0;

  DiscreteMeasure() = default;
  DiscreteMeasure(std::vector<Atom> a, std::size_t dim)
      : atoms(std::move(a)), dimension(dim) {}
  explicit DiscreteMeasure(std::vector<Atom> a) : atoms(std::move(a)) {
    if (!atoms.empty()) dimension = atoms.front().attrs.size();
  }

  double total_mass() const {
    double t = 0.0;
    for (const auto& a : atoms) t += a.mass;
    return t;
  }

  DiscreteMeasure merged() const {
    std::map<AttrVector, double> acc;
    for (const auto& a : atoms) acc[a.attrs] += a.mass;
    DiscreteMeasure out;
    out.dimension = dimension;
    for (auto& [x, m] : acc) out.atoms.push_back({x, m});
    return out;
  }

  /// Sorted distinct attribute vectors carrying mass above `tol`.
  std::vector<AttrVector> support(double tol = 0.0) const {
    std::vector<AttrVector> s;
    for (const auto& a : merged().atoms)
      if (a.mass > tol) s.push_back(a.attrs);
    return s;
  }

  double mass_at(const AttrVector& x) const {
    double m = 0.0;
    for (const auto& a : atoms)
      if (a.attrs == x) m += a.mass;
    return m;
  }

  bool all_integral(double tol = 1e-12) const {
    return std::all_of(atoms.begin(), atoms.end(), [&](const Atom& a) {
      return std::abs(a.mass - std::round(a.mass)) <= tol;
    });
  }
};

struct MarketInstance {
  DiscreteMeasure firms;
  DiscreteMeasure workers;
};

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;

  bool ok() const { return violations.empty(); }
};

inline bool masses_equal(double a, double b, double tol) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= tol * scale;
}

namespace detail {

inline void check_measure(const DiscreteMeasure& m, const std::string& side,
                          ValidationReport& r) {
  std::map<AttrVector, int> seen;
  for (const auto& a : m.atoms) {
    if (a.attrs.empty()) {
      r.violations.push_back(side + " atom with empty attribute vector");
      continue;
    }
    if (a.attrs.size() != m.dimension) {
      r.violations.push_back(side + " atom " + to_string(a.attrs) +
                             " has dimension " + std::to_string(a.attrs.size()) +
                             ", expected " + std::to_string(m.dimension));
    }
    for (double v : a.attrs) {
      if (!std::isfinite(v)) {
        r.violations.push_back(side + " atom " + to_string(a.attrs) +
                               " has a non-finite attribute");
        break;
      }
    }
    if (!std::isfinite(a.mass) || a.mass < 0.0) {
      r.violations.push_back("negative mass " + format_number(a.mass) + " at " +
                             side + " atom " + to_string(a.attrs));
    }
    if (++seen[a.attrs] == 2) {
      r.warnings.push_back("duplicate " + side + " atom " + to_string(a.attrs) +
                           " merged by summing mass");
    }
  }
}

}  // namespace detail

inline ValidationReport validate_market(const MarketInstance& m,
                                        double tol = 1e-9) {
  ValidationReport r;
  detail::check_measure(m.firms, "firm", r);
  detail::check_measure(m.workers, "worker", r);
  const double f = m.firms.total_mass();
  const double w = m.workers.total_mass();
  if (!masses_equal(f, w, tol)) {
    r.violations.push_back("mass mismatch " + format_number(std::abs(f - w)));
  }
  return r;
}

/// Firm-worker pair of attribute vectors.
struct Couple {
  AttrVector x;
  AttrVector y;

  auto operator<=>(const Couple&) const = default;
};

inline std::string to_string(const Couple& c) {
  return "[" + to_string(c.x) + "," + to_string(c.y) + "]";
}

/// Nonnegative mass on firm-type x worker-type cells. Cells are kept in
/// lexicographic order so iteration (and witness reporting) is reproducible.
class MatchingMeasure {
 public:
  using CellMap = std::map<Couple, double>;

  MatchingMeasure() = default;
  MatchingMeasure(std::size_t firm_dim, std::size_t worker_dim)
      : firm_dim_(firm_dim), worker_dim_(worker_dim) {}

  std::size_t firm_dim() const { return firm_dim_; }
  std::size_t worker_dim() const { return worker_dim_; }
  const CellMap& cells() const { return cells_; }

  void add(const AttrVector& x, const AttrVector& y, double mass) {
    if (cells_.empty() && firm_dim_ == 0 && worker_dim_ == 0) {
      firm_dim_ = x.size();
      worker_dim_ = y.size();
    }
    if (x.size() != firm_dim_ || y.size() != worker_dim_)
      throw DataError("matching cell " + to_string(Couple{x, y}) +
                      " does not match dimensions (" + std::to_string(firm_dim_) +
                      "," + std::to_string(worker_dim_) + ")");
    auto& m = cells_[Couple{x, y}];
    m += mass;
    if (m == 0.0) cells_.erase(Couple{x, y});
  }

  void set(const AttrVector& x, const AttrVector& y, double mass) {
    cells_.erase(Couple{x, y});
    if (mass != 0.0) add(x, y, mass);
  }

  double mass(const AttrVector& x, const AttrVector& y) const {
    auto it = cells_.find(Couple{x, y});
    return it == cells_.end() ? 0.0 : it->second;
  }

  double total() const {
    double t = 0.0;
    for (const auto& [c, m] : cells_) t += m;
    return t;
  }

  DiscreteMeasure firm_marginal() const {
    std::map<AttrVector, double> acc;
    for (const auto& [c, m] : cells_) acc[c.x] += m;
    DiscreteMeasure d;
    d.dimension = firm_dim_;
    for (auto& [x, m] : acc) d.atoms.push_back({x, m});
    return d;
  }

  DiscreteMeasure worker_marginal() const {
    std::map<AttrVector, double> acc;
    for (const auto& [c, m] : cells_) acc[c.y] += m;
    DiscreteMeasure d;
    d.dimension = worker_dim_;
    for (auto& [y, m] : acc) d.atoms.push_back({y, m});
    return d;
  }

  /// Cells with mass strictly above `tol`, in lexicographic order.
  std::vector<Couple> support(double tol = 0.0) const {
    std::vector<Couple> s;
    for (const auto& [c, m] : cells_)
      if (m > tol) s.push_back(c);
    return s;
  }

  template <typename F>
  double integrate(const F& q) const {
    double v = 0.0;
    for (const auto& [c, m] : cells_) v += m * q(c.x, c.y);
    return v;
  }

  bool operator==(const MatchingMeasure& o) const { return cells_ == o.cells_; }
  bool operator<(const MatchingMeasure& o) const { return cells_ < o.cells_; }

 private:
  std::size_t firm_dim_ = 0;
  std::size_t worker_dim_ = 0;
  CellMap cells_;
};

inline MatchingMeasure product_coupling(const MarketInstance& m) {
  const double total = m.firms.total_mass();
  MatchingMeasure out(m.firms.dimension, m.workers.dimension);
  if (total <= 0.0) return out;
  for (const auto& f : m.firms.merged().atoms)
    for (const auto& w : m.workers.merged().atoms)
      if (f.mass > 0.0 && w.mass > 0.0) out.add(f.attrs, w.attrs, f.mass * w.mass / total);
  return out;
}

/// Checks the no-single property: both marginals of `M` reproduce the market.
inline ValidationReport validate_matching(const MatchingMeasure& M,
                                          const MarketInstance& m,
                                          double tol = 1e-9) {
  if (!M.cells().empty() &&
      (M.firm_dim() != m.firms.dimension || M.worker_dim() != m.workers.dimension))
    throw DataError("matching dimensions (" + std::to_string(M.firm_dim()) + "," +
                    std::to_string(M.worker_dim()) +
                    ") disagree with market dimensions (" +
                    std::to_string(m.firms.dimension) + "," +
                    std::to_string(m.workers.dimension) + ")");
  ValidationReport r;
  for (const auto& [c, mass] : M.cells()) {
    if (mass < 0.0)
      r.violations.push_back("negative mass " + format_number(mass) + " at cell " +
                             to_string(c));
  }
  auto compare = [&](const DiscreteMeasure& target, const DiscreteMeasure& got,
                     const std::string& side) {
    std::map<AttrVector, double> want, have;
    for (const auto& a : target.atoms) want[a.attrs] += a.mass;
    for (const auto& a : got.atoms) have[a.attrs] += a.mass;
    std::set<AttrVector> keys;
    for (auto& [k, v] : want) keys.insert(k);
    for (auto& [k, v] : have) keys.insert(k);
    for (const auto& k : keys) {
      const double a = want.count(k) ? want[k] : 0.0;
      const double b = have.count(k) ? have[k] : 0.0;
      if (!masses_equal(a, b, tol))
        r.violations.push_back(side + " marginal mismatch at " + to_string(k) +
                               ": expected " + format_number(a) + ", got " +
                               format_number(b));
    }
  };
  compare(m.firms, M.firm_marginal(), "firm");
  compare(m.workers, M.worker_marginal(), "worker");
  return r;
}

/// Disjoint sets of (firm attribute, worker attribute) index pairs, 1-based.
struct ComplementarityPattern {
  using IndexPair = std::pair<int, int>;
  std::set<IndexPair> P;
  std::set<IndexPair> N;

  /// Throws DataError unless P and N are disjoint and inside [1,K]x[1,L].
  void validate(std::size_t K, std::size_t L) const {
    auto in_range = [&](const IndexPair& p) {
      return p.first >= 1 && p.second >= 1 && static_cast<std::size_t>(p.first) <= K &&
             static_cast<std::size_t>(p.second) <= L;
    };
    for (const auto& p : P) {
      if (!in_range(p))
        throw DataError("pattern index (" + std::to_string(p.first) + "," +
                        std::to_string(p.second) + ") out of range");
      if (N.count(p))
        throw DataError("pattern index (" + std::to_string(p.first) + "," +
                        std::to_string(p.second) + ") is in both P and N");
    }
    for (const auto& p : N)
      if (!in_range(p))
        throw DataError("pattern index (" + std::to_string(p.first) + "," +
                        std::to_string(p.second) + ") out of range");
  }

  ComplementarityPattern reversed() const { return {N, P}; }

  bool operator==(const ComplementarityPattern&) const = default;
};

/// Matching output function Q(x, y).
class OutputSpec {
 public:
  struct Quadratic {
    Matrix theta;  // K x L
  };
  struct Tabulated {
    std::map<Couple, double> values;
  };
  struct Function {
    std::function<double(const AttrVector&, const AttrVector&)> fn;
  };

  OutputSpec() = default;

  static OutputSpec quadratic(Matrix theta) {
    for (const auto& row : theta) {
      if (row.size() != theta.front().size())
        throw DataError("quadratic coefficient matrix is ragged");
      for (double v : row)
        if (!std::isfinite(v)) throw DataError("quadratic coefficient is not finite");
    }
    OutputSpec q;
    q.repr_ = Quadratic{std::move(theta)};
    return q;
  }

  static OutputSpec tabulated(std::map<Couple, double> values) {
    OutputSpec q;
    q.repr_ = Tabulated{std::move(values)};
    return q;
  }

  static OutputSpec function(std::function<double(const AttrVector&, const AttrVector&)> f) {
    OutputSpec q;
    q.repr_ = Function{std::move(f)};
    return q;
  }

  bool is_quadratic() const { return std::holds_alternative<Quadratic>(repr_); }
  bool is_tabulated() const { return std::holds_alternative<Tabulated>(repr_); }

  const Matrix& theta() const {
    if (!is_quadratic()) throw DataError("output function is not quadratic");
    return std::get<Quadratic>(repr_).theta;
  }

  const std::map<Couple, double>& table() const {
    if (!is_tabulated()) throw DataError("output function is not tabulated");
    return std::get<Tabulated>(repr_).values;
  }

  double operator()(const AttrVector& x, const AttrVector& y) const {
    if (const auto* q = std::get_if<Quadratic>(&repr_)) {
      if (q->theta.size() != x.size() || (!q->theta.empty() && q->theta[0].size() != y.size()))
        throw DataError("quadratic output of shape " + std::to_string(q->theta.size()) +
                        "x" + std::to_string(q->theta.empty() ? 0 : q->theta[0].size()) +
                        " evaluated at " + to_string(Couple{x, y}));
      double v = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k)
        for (std::size_t l = 0; l < y.size(); ++l) v += q->theta[k][l] * x[k] * y[l];
      return v;
    }
    if (const auto* t = std::get_if<Tabulated>(&repr_)) {
      auto it = t->values.find(Couple{x, y});
      if (it == t->values.end())
        throw DataError("tabulated output undefined at " + to_string(Couple{x, y}));
      return it->second;
    }
    const auto& f = std::get<Function>(repr_);
    if (!f.fn) throw DataError("empty output function");
    return f.fn(x, y);
  }

  OutputSpec negated() const {
    if (const auto* q = std::get_if<Quadratic>(&repr_)) {
      Matrix t = q->theta;
      for (auto& row : t)
        for (auto& v : row) v = -v;
      return quadratic(std::move(t));
    }
    if (const auto* t = std::get_if<Tabulated>(&repr_)) {
      auto vals = t->values;
      for (auto& [c, v] : vals) v = -v;
      return tabulated(std::move(vals));
    }
    auto f = std::get<Function>(repr_).fn;
    return function([f](const AttrVector& x, const AttrVector& y) { return -f(x, y); });
  }

 private:
  std::variant<Quadratic, Tabulated, Function> repr_ = Quadratic{};
};

/// Joint table of one firm attribute against one worker attribute.
struct BivariateTable {
  std::vector<double> rows;  // strictly increasing
  std::vector<double> cols;  // strictly increasing
  Matrix mass;               // rows.size() x cols.size()

  double total() const {
    double t = 0.0;
    for (const auto& r : mass)
      for (double v : r) t += v;
    return t;
  }
};

/// Sums M over every cell agreeing on firm attribute k and worker attribute l
/// (both 1-based).
inline BivariateTable aggregate_bivariate(const MatchingMeasure& M, int k, int l) {
  if (k < 1 || static_cast<std::size_t>(k) > M.firm_dim() || l < 1 ||
      static_cast<std::size_t>(l) > M.worker_dim())
    throw DataError("aggregate_bivariate index (" + std::to_string(k) + "," +
                    std::to_string(l) + ") out of range");
  std::set<double> rs, cs;
  for (const auto& [c, m] : M.cells()) {
    rs.insert(c.x[k - 1]);
    cs.insert(c.y[l - 1]);
  }
  BivariateTable t;
  t.rows.assign(rs.begin(), rs.end());
  t.cols.assign(cs.begin(), cs.end());
  t.mass.assign(t.rows.size(), std::vector<double>(t.cols.size(), 0.0));
  for (const auto& [c, m] : M.cells()) {
    const auto i = std::lower_bound(t.rows.begin(), t.rows.end(), c.x[k - 1]) - t.rows.begin();
    const auto j = std::lower_bound(t.cols.begin(), t.cols.end(), c.y[l - 1]) - t.cols.begin();
    t.mass[i][j] += m;
  }
  return t;
}

/// Sorted distinct firm and worker types over which grid-relative checks run.
struct SupportGrid {
  std::vector<AttrVector> firms;
  std::vector<AttrVector> workers;

  static SupportGrid from_market(const MarketInstance& m) {
    return {m.firms.support(), m.workers.support()};
  }

  static SupportGrid from_matching(const MatchingMeasure& M) {
    return {M.firm_marginal().support(), M.worker_marginal().support()};
  }

  /// Union of the marginal supports of several measures.
  static SupportGrid from_matchings(std::initializer_list<const MatchingMeasure*> ms) {
    std::set<AttrVector> xs, ys;
    for (const auto* M : ms)
      for (const auto& [c, m] : M->cells()) {
        xs.insert(c.x);
        ys.insert(c.y);
      }
    return {{xs.begin(), xs.end()}, {ys.begin(), ys.end()}};
  }

  std::size_t firm_dim() const { return firms.empty() ? 0 : firms.front().size(); }
  std::size_t worker_dim() const { return workers.empty() ? 0 : workers.front().size(); }
};

}  // namespace mmatch
