#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace mmatch;
using namespace mmatch::testing;

namespace {

// Applies up to `steps` random P,N concordance improving unit swaps to M.
MatchingMeasure improve(std::mt19937_64& rng, MatchingMeasure M, const ComplementarityPattern& pat,
                        int steps) {
  for (int s = 0; s < steps; ++s) {
    const auto sup = M.support();
    std::vector<Transfer> options;
    for (const auto& a : sup)
      for (const auto& b : sup) {
        if (!(a < b)) continue;
        // Losing corners (x,y'),(x',y) are the two support cells a, b.
        auto t = make_transfer(a.x, b.x, b.y, a.y, 1.0);
        if (is_pn_improving(t, pat) &&
            classify_pair({t.x, t.y}, {t.xp, t.yp}, pat).pn_concordant)
          options.push_back(t);
      }
    if (options.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    M = apply_transfer(M, options[pick(rng)]);
  }
  return M;
}

}  // namespace

TEST(Dominance, Reflexive) {
  const auto M = load_matching("skills_optimal");
  const auto r = dominates_pn(M, M, diag_pattern());
  EXPECT_TRUE(r.dominates);
  EXPECT_TRUE(r.cert.weights.empty());
}

TEST(Dominance, ComonotoneDominatesEveryUnidimensionalCoupling) {
  std::mt19937_64 rng(4);
  const ComplementarityPattern pat{{{1, 1}}, {}};
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_market(rng, 1, 1, 6, 4);
    const auto pos = assortative_coupling(m.firms, m.workers, Direction::Positive);
    const auto other = random_plan(rng, m);
    const auto r = dominates_pn(pos, other, pat);
    EXPECT_TRUE(r.dominates);
    EXPECT_TRUE(r.cert.verified);
  }
}

TEST(Dominance, CrossMarketPlansMutuallyNonDominating) {
  const auto M = load_matching("cross_first");
  const auto Mp = load_matching("cross_second");
  for (const auto& [a, b] : {std::pair{M, Mp}, std::pair{Mp, M}}) {
    const auto r = dominates_pn(a, b, diag_pattern());
    EXPECT_FALSE(r.dominates);
    ASSERT_TRUE(r.cert.separating_q.has_value());
    EXPECT_TRUE(r.cert.verified);
  }
  // Oracle cross-check: each measure is the unique optimum for some P,N
  // modular Q, so neither can dominate the other.
  const auto m = load_market("cross_market");
  const auto g1 = OutputSpec::quadratic({{1, 0}, {0, 0}});
  const auto g0 = OutputSpec::quadratic({{0, 0}, {0, 1}});
  EXPECT_GT(M.integrate(g1), Mp.integrate(g1));
  EXPECT_GT(Mp.integrate(g0), M.integrate(g0));
  (void)m;
}

TEST(Dominance, SeparatingDirectionIsCompatibleAndSeparates) {
  std::mt19937_64 rng(8);
  int separated = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = random_market(rng, 2, 2, 5, 2);
    auto [Q, pat] = random_strict_pn(rng, 2, 2);
    const auto A = random_plan(rng, m), B = random_plan(rng, m);
    const auto r = dominates_pn(A, B, pat);
    if (r.dominates) continue;
    ++separated;
    ASSERT_TRUE(r.cert.separating_q);
    const auto Qs = OutputSpec::tabulated(*r.cert.separating_q);
    EXPECT_LT(A.integrate(Qs), B.integrate(Qs) - 1e-9);
  }
  EXPECT_GT(separated, 0);
}

TEST(Dominance, CertificateReplaysToTarget) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = random_market(rng, 2, 2, 6, 3);
    auto [Q, pat] = random_strict_pn(rng, 2, 2);
    const auto B = random_plan(rng, m);
    const auto A = improve(rng, B, pat, 3);
    const auto r = dominates_pn(A, B, pat);
    ASSERT_TRUE(r.dominates) << "trial " << trial;
    EXPECT_TRUE(r.cert.verified);
    std::map<Couple, double> v;
    for (const auto& [c, x] : B.cells()) v[c] += x;
    for (const auto& t : r.cert.weights) {
      EXPECT_TRUE(is_pn_improving(t, pat));
      v[{t.x, t.y}] += t.alpha;
      v[{t.xp, t.yp}] += t.alpha;
      v[{t.x, t.yp}] -= t.alpha;
      v[{t.xp, t.y}] -= t.alpha;
    }
    for (const auto& [c, x] : v) EXPECT_NEAR(x, A.mass(c.x, c.y), 1e-9);
  }
}

TEST(Dominance, TransitiveOnImprovementChains) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 25; ++trial) {
    const auto m = random_market(rng, 2, 2, 6, 3);
    auto [Q, pat] = random_strict_pn(rng, 2, 2);
    const auto C = random_plan(rng, m);
    const auto B = improve(rng, C, pat, 2);
    const auto A = improve(rng, B, pat, 2);
    ASSERT_TRUE(dominates_pn(A, B, pat).dominates);
    ASSERT_TRUE(dominates_pn(B, C, pat).dominates);
    EXPECT_TRUE(dominates_pn(A, C, pat).dominates);
  }
}

TEST(Dominance, ImpliesHigherOutputForCompatibleQ) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> mag(0.0, 3.0);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_market(rng, 2, 2, 6, 3);
    auto [Q0, pat] = random_strict_pn(rng, 2, 2);
    const auto B = random_plan(rng, m);
    const auto A = improve(rng, B, pat, 3);
    if (!dominates_pn(A, B, pat).dominates) continue;
    Matrix th(2, std::vector<double>(2, 0.0));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        if (pat.P.count({i + 1, j + 1})) th[i][j] = mag(rng);
        if (pat.N.count({i + 1, j + 1})) th[i][j] = -mag(rng);
      }
    const auto Q = OutputSpec::quadratic(th);
    EXPECT_GE(A.integrate(Q), B.integrate(Q) - 1e-9);
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(Dominance, MarginalMismatchThrows) {
  EXPECT_THROW(dominates_pn(load_matching("skills_optimal"), load_matching("scheme1"), diag_pattern()),
               DataError);
}

TEST(Undominance, SchemeThreeIsDominatedYetWeaklySorted) {
  const auto M = load_matching("scheme3");
  EXPECT_TRUE(check_weak_pn(M, diag_pattern()).holds);
  const auto r = is_undominated(M, diag_pattern());
  EXPECT_FALSE(r.undominated);
  ASSERT_TRUE(r.direction && r.improved);
  EXPECT_GT(r.gain, 0.0);
  EXPECT_TRUE(validate_matching(*r.improved, load_market("unit_market"), 1e-9).ok());
  EXPECT_TRUE(dominates_pn(*r.improved, M, diag_pattern()).dominates);
  // The reference swap sequence ends at same-type matching, which dominates scheme-3.
  auto S = apply_transfer(M, make_transfer({10, 10}, {10, 20}, {20, 20}, {10, 20}, 1.0));
  S = apply_transfer(S, make_transfer({20, 10}, {20, 20}, {20, 10}, {10, 10}, 1.0));
  EXPECT_EQ(S, load_matching("scheme1"));
  S = apply_transfer(S, make_transfer({10, 10}, {20, 20}, {10, 10}, {20, 20}, 1.0));
  EXPECT_EQ(S, load_matching("scheme2"));
  EXPECT_TRUE(dominates_pn(S, M, diag_pattern()).dominates);
  EXPECT_GT(S.integrate(OutputSpec::quadratic({{1, 0}, {0, 2}})),
            M.integrate(OutputSpec::quadratic({{1, 0}, {0, 2}})));
}

TEST(Undominance, CrossMarketPlansBothUndominated) {
  EXPECT_TRUE(is_undominated(load_matching("cross_first"), diag_pattern()).undominated);
  EXPECT_TRUE(is_undominated(load_matching("cross_second"), diag_pattern()).undominated);
}

TEST(Undominance, GlobalSortedWitnessIsUndominated) {
  MarketInstance m{DiscreteMeasure({{{0, 0}, 1}, {{1, 1}, 2}, {{2, 1}, 1}}),
                   DiscreteMeasure({{{0, 1}, 2}, {{1, 1}, 1}, {{2, 2}, 1}})};
  const auto s = exists_global_pn(m, diag_pattern());
  ASSERT_EQ(s.status, SearchStatus::Exists);
  EXPECT_TRUE(is_undominated(*s.witness, diag_pattern()).undominated);
}

TEST(Undominance, WeakSortingFailureImpliesDominated) {
  std::mt19937_64 rng(15);
  int failures = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto m = random_market(rng, 2, 2, 5, 3);
    auto [Q, pat] = random_strict_pn(rng, 2, 2);
    const auto M = random_plan(rng, m);
    if (check_weak_pn(M, pat).holds) continue;
    ++failures;
    EXPECT_FALSE(is_undominated(M, pat).undominated) << "trial " << trial;
  }
  EXPECT_GT(failures, 0);
}
