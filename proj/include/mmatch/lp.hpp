#pragma once

// Small dense two-phase simplex (Bland's rule) for the cone-membership and
// separation problems of the modular order. Intended for at most a few
// hundred rows and columns.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mmatch/error.hpp"

namespace mmatch::lp {

enum class Sense { LessEq, GreaterEq, Equal };
enum class Status { Optimal, Infeasible, Unbounded };

struct Constraint {
  std::vector<double> a;
  Sense sense = Sense::Equal;
  double b = 0.0;
};

/// minimize c'x subject to the constraints and x >= 0.
struct Program {
  std::size_t n = 0;
  std::vector<double> c;
  std::vector<Constraint> rows;

  void add(std::vector<double> a, Sense s, double b) {
    if (a.size() != n) throw NumericalError("lp: constraint width mismatch");
    rows.push_back({std::move(a), s, b});
  }
};

struct Result {
  Status status = Status::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  std::size_t pivots = 0;
};

namespace detail {

class Tableau {
 public:
  Tableau(std::size_t m, std::size_t cols) : m_(m), cols_(cols), t_((m + 1) * (cols + 1), 0.0) {}

  double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }

  void pivot(std::size_t r, std::size_t c) {
    const double p = at(r, c);
    for (std::size_t j = 0; j <= cols_; ++j) at(r, j) /= p;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = at(i, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) at(i, j) -= f * at(r, j);
      at(i, c) = 0.0;
    }
  }

  std::size_t m_, cols_;

 private:
  std::vector<double> t_;
};

}  // namespace detail

inline Result solve(const Program& prog, double eps = 1e-9, std::size_t max_pivots = 200000) {
  const std::size_t n = prog.n;
  const std::size_t m = prog.rows.size();
  std::size_t slacks = 0;
  for (const auto& r : prog.rows)
    if (r.sense != Sense::Equal) ++slacks;
  const std::size_t art0 = n + slacks;
  const std::size_t cols = art0 + m;  // one artificial per row
  detail::Tableau T(m, cols);
  std::vector<std::size_t> basis(m);

  std::size_t s = n;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = prog.rows[i];
    const double sign = row.b < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) T.at(i, j) = sign * row.a[j];
    if (row.sense == Sense::LessEq) T.at(i, s++) = sign;
    if (row.sense == Sense::GreaterEq) T.at(i, s++) = -sign;
    T.at(i, art0 + i) = 1.0;
    T.rhs(i) = sign * row.b;
    basis[i] = art0 + i;
  }

  Result res;
  auto run_phase = [&](std::size_t allowed) -> Status {
    while (true) {
      std::size_t enter = cols;
      for (std::size_t j = 0; j < allowed; ++j)
        if (T.at(m, j) < -eps) {
          enter = j;
          break;
        }
      if (enter == cols) return Status::Optimal;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i)
        if (T.at(i, enter) > eps) best = std::min(best, T.rhs(i) / T.at(i, enter));
      std::size_t leave = m;
      for (std::size_t i = 0; i < m; ++i)
        if (T.at(i, enter) > eps && T.rhs(i) / T.at(i, enter) <= best + eps &&
            (leave == m || basis[i] < basis[leave]))
          leave = i;
      if (leave == m) return Status::Unbounded;
      T.pivot(leave, enter);
      basis[leave] = enter;
      if (++res.pivots > max_pivots) throw NumericalError("lp: pivot limit exceeded");
    }
  };

  // Phase 1: minimize the sum of artificials (objective row holds reduced costs).
  for (std::size_t j = 0; j <= cols; ++j) {
    double v = 0.0;
    for (std::size_t i = 0; i < m; ++i) v -= T.at(i, j);
    T.at(m, j) = v;
  }
  for (std::size_t i = 0; i < m; ++i) T.at(m, art0 + i) = 0.0;
  run_phase(art0);
  if (-T.rhs(m) > eps * std::max<double>(1.0, static_cast<double>(m))) {
    res.status = Status::Infeasible;
    return res;
  }
  // Drive remaining artificials out of the basis; rows where that is
  // impossible are redundant and stay (their artificial sits at zero).
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < art0) continue;
    for (std::size_t j = 0; j < art0; ++j)
      if (std::abs(T.at(i, j)) > eps) {
        T.pivot(i, j);
        basis[i] = j;
        break;
      }
  }

  // Phase 2: load the real objective expressed in the current basis.
  for (std::size_t j = 0; j <= cols; ++j) T.at(m, j) = j < n ? prog.c[j] : 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double cb = basis[i] < n ? prog.c[basis[i]] : 0.0;
    if (cb == 0.0) continue;
    for (std::size_t j = 0; j <= cols; ++j) T.at(m, j) -= cb * T.at(i, j);
  }
  const Status st = run_phase(art0);
  res.status = st;
  if (st == Status::Unbounded) return res;
  res.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) res.x[basis[i]] = std::max(0.0, T.rhs(i));
  res.objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) res.objective += prog.c[j] * res.x[j];
  return res;
}

}  // namespace mmatch::lp
