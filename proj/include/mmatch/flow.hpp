#pragma once

// Network-flow kernels: Dinic maximum flow and successive-shortest-path
// minimum-cost flow with lexicographic (primary, secondary) arc costs.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "mmatch/error.hpp"

namespace mmatch::flow {

/// Dinic's algorithm. `Cap` is an integer or floating type; for floating
/// capacities residuals below `eps` are treated as saturated.
template <typename Cap>
class MaxFlow {
 public:
  explicit MaxFlow(int n, Cap eps = Cap{}) : g_(n), level_(n), it_(n), eps_(eps) {}

  int add_edge(int u, int v, Cap cap) {
    g_[u].push_back({v, static_cast<int>(g_[v].size()), cap});
    g_[v].push_back({u, static_cast<int>(g_[u].size()) - 1, Cap{}});
    return static_cast<int>(g_[u].size()) - 1;
  }

  Cap run(int s, int t) {
    Cap total{};
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (true) {
        const Cap f = dfs(s, t, std::numeric_limits<Cap>::max());
        if (!(f > eps_)) break;
        total += f;
      }
    }
    return total;
  }

  /// Flow currently carried by the `idx`-th arc out of `u`.
  Cap flow_on(int u, int idx) const {
    const auto& e = g_[u][idx];
    return g_[e.to][e.rev].cap;
  }

 private:
  struct Edge {
    int to;
    int rev;
    Cap cap;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (const auto& e : g_[u])
        if (e.cap > eps_ && level_[e.to] < 0) {
          level_[e.to] = level_[u] + 1;
          q.push(e.to);
        }
    }
    return level_[t] >= 0;
  }

  Cap dfs(int u, int t, Cap pushed) {
    if (u == t) return pushed;
    for (int& i = it_[u]; i < static_cast<int>(g_[u].size()); ++i) {
      auto& e = g_[u][i];
      if (!(e.cap > eps_) || level_[e.to] != level_[u] + 1) continue;
      const Cap d = dfs(e.to, t, std::min(pushed, e.cap));
      if (d > eps_) {
        e.cap -= d;
        g_[e.to][e.rev].cap += d;
        return d;
      }
    }
    return Cap{};
  }

  std::vector<std::vector<Edge>> g_;
  std::vector<int> level_;
  std::vector<int> it_;
  Cap eps_;
};

/// Lexicographic arc cost: primary (real) first, secondary (integer) as the
/// tie-break. Primary values within `eps` of each other count as equal.
struct LexCost {
  double primary = 0.0;
  std::int64_t secondary = 0;

  LexCost operator+(const LexCost& o) const {
    return {primary + o.primary, secondary + o.secondary};
  }
  LexCost operator-() const { return {-primary, -secondary}; }
};

inline bool lex_less(const LexCost& a, const LexCost& b, double eps) {
  if (a.primary < b.primary - eps) return true;
  if (a.primary > b.primary + eps) return false;
  return a.secondary < b.secondary;
}

/// Successive shortest paths (queue-based Bellman-Ford on the residual graph)
/// with integer capacities. Negative arc costs are allowed as long as the
/// initial graph has no negative cycle.
class MinCostFlow {
 public:
  explicit MinCostFlow(int n, double eps = 1e-9) : g_(n), eps_(eps) {}

  int add_edge(int u, int v, std::int64_t cap, LexCost cost) {
    g_[u].push_back({v, static_cast<int>(g_[v].size()), cap, cost});
    g_[v].push_back({u, static_cast<int>(g_[u].size()) - 1, 0, -cost});
    return static_cast<int>(g_[u].size()) - 1;
  }

  /// Sends up to `limit` units from s to t at minimum cost; returns the flow sent.
  std::int64_t run(int s, int t, std::int64_t limit) {
    const int n = static_cast<int>(g_.size());
    std::int64_t sent = 0;
    std::vector<LexCost> dist(n);
    std::vector<char> reached(n), queued(n);
    std::vector<int> pv(n), pe(n), relax_count(n);
    while (sent < limit) {
      std::fill(reached.begin(), reached.end(), 0);
      std::fill(queued.begin(), queued.end(), 0);
      std::fill(relax_count.begin(), relax_count.end(), 0);
      std::deque<int> q;
      dist[s] = {};
      reached[s] = 1;
      q.push_back(s);
      queued[s] = 1;
      while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        queued[u] = 0;
        for (int i = 0; i < static_cast<int>(g_[u].size()); ++i) {
          const auto& e = g_[u][i];
          if (e.cap <= 0) continue;
          const LexCost nd = dist[u] + e.cost;
          if (!reached[e.to] || lex_less(nd, dist[e.to], eps_)) {
            dist[e.to] = nd;
            reached[e.to] = 1;
            pv[e.to] = u;
            pe[e.to] = i;
            if (!queued[e.to]) {
              if (++relax_count[e.to] > n + 1)
                throw NumericalError("min-cost flow: negative residual cycle (cost round-off)");
              q.push_back(e.to);
              queued[e.to] = 1;
            }
          }
        }
      }
      if (!reached[t]) break;
      std::int64_t push = limit - sent;
      for (int v = t; v != s; v = pv[v]) push = std::min(push, g_[pv[v]][pe[v]].cap);
      for (int v = t; v != s; v = pv[v]) {
        auto& e = g_[pv[v]][pe[v]];
        e.cap -= push;
        g_[v][e.rev].cap += push;
      }
      sent += push;
    }
    return sent;
  }

  std::int64_t flow_on(int u, int idx) const {
    const auto& e = g_[u][idx];
    return g_[e.to][e.rev].cap;
  }

 private:
  struct Edge {
    int to;
    int rev;
    std::int64_t cap;
    LexCost cost;
  };

  std::vector<std::vector<Edge>> g_;
  double eps_;
};

}  // namespace mmatch::flow
