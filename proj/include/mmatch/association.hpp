#pragma once

// Concordance/discordance counts and Goodman-Kruskal gamma for couple data
// and joint contingency tables.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "mmatch/market.hpp"

namespace mmatch {

struct CoupleRecord {
  double weight = 1.0;
  AttrVector x;  // woman / firm attributes
  AttrVector y;  // man / worker attributes
};

struct CoupleDataset {
  std::vector<CoupleRecord> records;
  std::vector<std::string> x_labels;  // e.g. {"E","H"}
  std::vector<std::string> y_labels;

  void validate() const {
    if (records.empty()) throw DataError("couple dataset is empty");
    const auto kx = records.front().x.size();
    const auto ky = records.front().y.size();
    for (std::size_t r = 0; r < records.size(); ++r) {
      const auto& rec = records[r];
      if (rec.x.size() != kx || rec.y.size() != ky)
        throw DataError("record " + std::to_string(r + 1) + " has non-uniform dimensions");
      if (!(rec.weight >= 0.0) || !std::isfinite(rec.weight))
        throw DataError("record " + std::to_string(r + 1) + " has invalid weight " +
                        format_number(rec.weight));
    }
  }

  double total_weight() const {
    double t = 0.0;
    for (const auto& r : records) t += r.weight;
    return t;
  }

  /// The dataset as a matching measure with record weights as mass.
  MatchingMeasure to_matching() const {
    MatchingMeasure M;
    for (const auto& r : records)
      if (r.weight > 0.0) M.add(r.x, r.y, r.weight);
    return M;
  }
};

enum class Side { W, M };  // W: x-side (women / firms), M: y-side (men / workers)

/// One attribute of one side, 1-based.
struct AttrRef {
  Side side = Side::W;
  int index = 1;
};

struct GammaSpec {
  AttrRef a;  // rows
  AttrRef b;  // columns
  std::string name;
};

/// Attribute positions of the couple data: E (education) first, H (health) second.
inline constexpr int kEducation = 1;
inline constexpr int kHealth = 2;

inline GammaSpec gamma_ww_he() { return {{Side::W, kHealth}, {Side::W, kEducation}, "W,W H,E"}; }
inline GammaSpec gamma_mm_he() { return {{Side::M, kHealth}, {Side::M, kEducation}, "M,M H,E"}; }
inline GammaSpec gamma_wm_he() { return {{Side::W, kHealth}, {Side::M, kEducation}, "W,M H,E"}; }
inline GammaSpec gamma_mw_he() { return {{Side::M, kHealth}, {Side::W, kEducation}, "M,W H,E"}; }
inline GammaSpec gamma_wm_hh() { return {{Side::W, kHealth}, {Side::M, kHealth}, "W,M H,H"}; }
inline GammaSpec gamma_wm_eh() { return {{Side::W, kEducation}, {Side::M, kHealth}, "W,M E,H"}; }
inline GammaSpec gamma_wm_ee() { return {{Side::W, kEducation}, {Side::M, kEducation}, "W,M E,E"}; }

/// The five association statistics of the couple data.
inline std::vector<GammaSpec> standard_gamma_specs() {
  return {gamma_ww_he(), gamma_mm_he(), gamma_wm_he(), gamma_mw_he(), gamma_wm_hh()};
}

/// Cross-spouse quartet: H,H  H,E  E,H  E,E (women's attribute first).
inline std::vector<GammaSpec> cross_gamma_quartet() {
  return {gamma_wm_hh(), gamma_wm_he(), gamma_wm_eh(), gamma_wm_ee()};
}

struct ConcordanceCounts {
  double concordant = 0.0;  // weighted unordered pairs
  double discordant = 0.0;
  double ties = 0.0;
  double pairs = 0.0;       // all weighted unordered pairs, self-pairs excluded
};

struct GammaResult {
  ConcordanceCounts counts;
  double C = 0.0;  // fractions of all pairs
  double D = 0.0;
  double ties = 0.0;
  double gamma = 0.0;
};

/// Concordance counts of a joint table, in O(rows * cols) via suffix sums.
/// Each cell counts as one weighted record unless `self_pair_weight`
/// (sum of squared record weights) is supplied.
inline ConcordanceCounts count_concordance(const BivariateTable& t,
                                           double self_pair_weight = -1.0) {
  const std::size_t R = t.rows.size(), C = t.cols.size();
  if (R == 0 || C == 0) throw DataError("empty contingency table");
  for (const auto& row : t.mass) {
    if (row.size() != C) throw DataError("ragged contingency table");
    for (double v : row)
      if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("invalid table mass " + format_number(v));
  }
  // below_right[r][c] = mass in rows > r and columns > c; below_left for columns < c.
  std::vector<std::vector<double>> suf(R + 1, std::vector<double>(C + 2, 0.0));
  for (std::size_t r = R; r-- > 0;)
    for (std::size_t c = C; c-- > 0;)
      suf[r][c] = t.mass[r][c] + suf[r + 1][c] + suf[r][c + 1] - suf[r + 1][c + 1];
  // pre[r][c] = mass in rows >= r and columns < c.
  std::vector<std::vector<double>> pre(R + 1, std::vector<double>(C + 1, 0.0));
  for (std::size_t r = R; r-- > 0;)
    for (std::size_t c = 1; c <= C; ++c)
      pre[r][c] = t.mass[r][c - 1] + pre[r + 1][c] + pre[r][c - 1] - pre[r + 1][c - 1];

  ConcordanceCounts k;
  double total = 0.0, sq = 0.0;
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      const double w = t.mass[r][c];
      total += w;
      sq += w * w;
      k.concordant += w * suf[r + 1][c + 1];
      k.discordant += w * pre[r + 1][c];
    }
  if (self_pair_weight < 0.0) self_pair_weight = sq;
  k.pairs = 0.5 * (total * total - self_pair_weight);
  k.ties = std::max(0.0, k.pairs - k.concordant - k.discordant);
  return k;
}

inline double attribute(const CoupleRecord& r, const AttrRef& a) {
  const auto& v = a.side == Side::W ? r.x : r.y;
  return v[static_cast<std::size_t>(a.index - 1)];
}

/// Weighted joint table of two attributes over the dataset.
inline BivariateTable joint_table(const CoupleDataset& data, const AttrRef& a, const AttrRef& b) {
  data.validate();
  const auto dims = [&](const AttrRef& r) {
    return r.side == Side::W ? data.records.front().x.size() : data.records.front().y.size();
  };
  for (const auto* r : {&a, &b})
    if (r->index < 1 || static_cast<std::size_t>(r->index) > dims(*r))
      throw DataError(std::string("unknown attribute ") + (r->side == Side::W ? "W" : "M") +
                      std::to_string(r->index));
  std::set<double> rs, cs;
  for (const auto& rec : data.records) {
    rs.insert(attribute(rec, a));
    cs.insert(attribute(rec, b));
  }
  BivariateTable t;
  t.rows.assign(rs.begin(), rs.end());
  t.cols.assign(cs.begin(), cs.end());
  t.mass.assign(t.rows.size(), std::vector<double>(t.cols.size(), 0.0));
  for (const auto& rec : data.records) {
    const auto i = std::lower_bound(t.rows.begin(), t.rows.end(), attribute(rec, a)) - t.rows.begin();
    const auto j = std::lower_bound(t.cols.begin(), t.cols.end(), attribute(rec, b)) - t.cols.begin();
    t.mass[i][j] += rec.weight;
  }
  return t;
}

inline ConcordanceCounts count_concordance(const CoupleDataset& data, const GammaSpec& spec) {
  double sq = 0.0;
  for (const auto& r : data.records) sq += r.weight * r.weight;
  return count_concordance(joint_table(data, spec.a, spec.b), sq);
}

inline GammaResult gamma_from_counts(const ConcordanceCounts& k) {
  if (!(k.concordant + k.discordant > 0.0))
    throw DataError("gamma undefined: every pair is tied");
  GammaResult g;
  g.counts = k;
  if (k.pairs > 0.0) {
    g.C = k.concordant / k.pairs;
    g.D = k.discordant / k.pairs;
    g.ties = k.ties / k.pairs;
  }
  g.gamma = (k.concordant - k.discordant) / (k.concordant + k.discordant);
  return g;
}

inline GammaResult kruskal_gamma(const BivariateTable& t) {
  return gamma_from_counts(count_concordance(t));
}

inline GammaResult kruskal_gamma(const CoupleDataset& data, const GammaSpec& spec) {
  return gamma_from_counts(count_concordance(data, spec));
}

/// Joint table in survey-tabulation layout: a 5x5 grid with
/// row and column category values 1..5.
inline BivariateTable category_table(const Matrix& mass) {
  BivariateTable t;
  for (std::size_t r = 0; r < mass.size(); ++r) t.rows.push_back(static_cast<double>(r + 1));
  for (std::size_t c = 0; c < (mass.empty() ? 0 : mass[0].size()); ++c)
    t.cols.push_back(static_cast<double>(c + 1));
  t.mass = mass;
  return t;
}

/// Reverses the column order (category values negated to stay increasing).
inline BivariateTable reverse_columns(const BivariateTable& t) {
  BivariateTable r;
  r.rows = t.rows;
  for (auto it = t.cols.rbegin(); it != t.cols.rend(); ++it) r.cols.push_back(-*it);
  for (const auto& row : t.mass) r.mass.emplace_back(row.rbegin(), row.rend());
  return r;
}

}  // namespace mmatch
