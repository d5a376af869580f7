#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace mmatch;
using namespace mmatch::testing;

namespace {

TypeVector uniform_types() {
  TypeVector f{};
  f.fill(1.0 / kTypes);
  return f;
}

// Counts proportional to a product of row and column weights: the logit
// fit has zero complementarities and offsets log(col weight).
TypeMatrix product_counts() {
  TypeMatrix c{};
  for (int r = 0; r < kTypes; ++r)
    for (int k = 0; k < kTypes; ++k) c[r][k] = (1 + r % 4) * (2 + (k * 7) % 5);
  return c;
}

double choice_ll(const std::vector<double>& v, const TypeMatrix& counts) {
  TypeVector f = uniform_types();
  return log_likelihood(ParamVector::from_flat(v), counts, f).choice;
}

// The benchmark complementarities with offsets that give every man type
// equal mass when women are uniform.
ParamVector balanced_truth() { return equilibrium_params(benchmark_theta(), uniform_types(), uniform_types()); }

}  // namespace

TEST(TypeIndex, EducationRunsFirst) {
  EXPECT_EQ(type_index(1, 1), 1);
  EXPECT_EQ(type_index(5, 1), 5);
  EXPECT_EQ(type_index(1, 2), 6);
  EXPECT_EQ(type_index(5, 5), 25);
  EXPECT_EQ(type_attrs(7), (AttrVector{2, 2}));
  EXPECT_THROW(type_attrs(26), DataError);
}

TEST(ChoiceProbabilities, ZeroParamsAreUniform) {
  const auto p = choice_probabilities(ParamVector{}, 13);
  for (double v : p) EXPECT_NEAR(v, 1.0 / kTypes, 1e-15);
}

TEST(ChoiceProbabilities, OffsetsOnlyIsMultinomialLogit) {
  ParamVector q;
  for (int c = 0; c < kTypes; ++c) q.offsets[c] = 0.1 * c;
  double s = 0.0;
  for (int c = 0; c < kTypes; ++c) s += std::exp(0.1 * c);
  for (int r : {1, 9, 25}) {
    const auto p = choice_probabilities(q, r);
    for (int c = 0; c < kTypes; ++c) EXPECT_NEAR(p[c], std::exp(0.1 * c) / s, 1e-14);
  }
}

TEST(ChoiceProbabilities, HealthOddsMultiplierAtBenchmarkTheta) {
  const auto P = choice_matrix(benchmark_theta());
  // Woman health 2 -> 3 and man health 2 -> 3, both with education 3.
  const int r = type_index(3, 2) - 1, rp = type_index(3, 3) - 1;
  const int c = type_index(3, 2) - 1, cp = type_index(3, 3) - 1;
  const double odds = P[rp][cp] * P[r][c] / (P[rp][c] * P[r][cp]);
  EXPECT_NEAR(odds, 2.1436, 5e-5);
  EXPECT_NEAR(std::log(odds), benchmark_theta().theta_hh(), 1e-12);
}

TEST(LogLikelihood, SingleCoupleAtZeroIsLogOneOverTwentyFive) {
  TypeMatrix c{};
  c[3][7] = 1.0;
  TypeVector f{};
  f[3] = 1.0;
  const auto ll = log_likelihood(ParamVector{}, c, f);
  EXPECT_NEAR(ll.choice, std::log(1.0 / 25.0), 1e-14);
  EXPECT_NEAR(ll.constant, 0.0, 1e-15);
}

TEST(LogLikelihood, DoublingCountsDoublesIt) {
  auto c = product_counts();
  const auto f = woman_fractions(c);
  const double a = log_likelihood(benchmark_theta(), c, f).total();
  for (auto& row : c)
    for (auto& v : row) v *= 2.0;
  EXPECT_NEAR(log_likelihood(benchmark_theta(), c, f).total(), 2.0 * a, 1e-9 * std::abs(a));
}

TEST(LogLikelihood, EmptyOrMissingFractionThrows) {
  EXPECT_THROW(log_likelihood(ParamVector{}, TypeMatrix{}, uniform_types()), DataError);
  TypeMatrix c{};
  c[0][0] = 1.0;
  EXPECT_THROW(log_likelihood(ParamVector{}, c, TypeVector{}), DataError);
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd(0.0, 0.3);
  const auto counts = product_counts();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(kParams);
    for (auto& x : v) x = nd(rng);
    const auto g = gradient(ParamVector::from_flat(v), counts);
    for (int k = 0; k < kParams; ++k) {
      const double h = 1e-3;
      auto at = [&](double s) {
        auto w = v;
        w[k] += s * h;
        return choice_ll(w, counts);
      };
      const double fd = (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h);
      EXPECT_NEAR(g[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "trial " << trial << " k " << k;
    }
  }
}

TEST(Hessian, IsNegativeSemidefinite) {
  const auto H = hessian(benchmark_theta(), product_counts());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  EXPECT_LE(es.eigenvalues().maxCoeff(), 1e-8);
}

TEST(FitMle, ProductCountsRecoverZeroComplementarity) {
  FitConfig cfg;
  cfg.method = FitMethod::Ascent;
  const auto counts = product_counts();
  const auto r = fit_mle(counts, woman_fractions(counts), cfg);
  for (const auto& row : r.params.theta)
    for (double v : row) EXPECT_LT(std::abs(v), 1e-6);
  for (int c = 1; c < kTypes; ++c)
    EXPECT_NEAR(r.params.offsets[c] - r.params.offsets[0],
                std::log(double(2 + (c * 7) % 5) / 2.0), 1e-6);
}

TEST(FitMle, SameSeedIsDeterministic) {
  const auto f = uniform_types();
  const auto counts = type_counts(simulate_couples(balanced_truth(), f, 5000, 3));
  FitConfig cfg;
  cfg.restarts = 3;
  cfg.iterations = 500;
  cfg.seed = 11;
  const auto a = fit_mle(counts, f, cfg), b = fit_mle(counts, f, cfg);
  EXPECT_EQ(a.params.flat(), b.params.flat());
  EXPECT_EQ(a.restart_objectives, b.restart_objectives);
  cfg.threads = 1;
  EXPECT_EQ(fit_mle(counts, f, cfg).params.flat(), a.params.flat());
}

TEST(FitMle, AnnealingAndAscentAgreeAtTheOptimum) {
  const auto f = uniform_types();
  const auto counts = type_counts(simulate_couples(balanced_truth(), f, 20000, 5));
  FitConfig cfg;
  cfg.restarts = 2;
  cfg.iterations = 1000;
  const auto a = fit_mle(counts, f, cfg);
  cfg.method = FitMethod::Ascent;
  const auto b = fit_mle(counts, f, cfg);
  for (int k = 0; k < kParams; ++k) EXPECT_NEAR(a.params.flat()[k], b.params.flat()[k], 1e-6);
  EXPECT_NEAR(a.params.theta_hh(), 0.7625, 0.1);
  EXPECT_NEAR(a.params.theta_ee(), 0.5572, 0.1);
  EXPECT_GE(a.log_likelihood.total(), log_likelihood(balanced_truth(), counts, f).total());
}

TEST(Simulate, SingleCoupleAndSeedDeterminism) {
  const auto d = simulate_couples(benchmark_theta(), uniform_types(), 1, 9);
  ASSERT_EQ(d.records.size(), 1u);
  EXPECT_EQ(d.records[0].x.size(), 2u);
  const auto e = simulate_couples(benchmark_theta(), uniform_types(), 1, 9);
  EXPECT_EQ(d.records[0].y, e.records[0].y);
  EXPECT_THROW(simulate_couples(benchmark_theta(), uniform_types(), 0, 9), DataError);
}

TEST(Simulate, FrequenciesConvergeToModel) {
  TypeVector f{};
  for (int r = 0; r < kTypes; ++r) f[r] = 1.0 + r % 3;
  double s = 0.0;
  for (double v : f) s += v;
  for (double& v : f) v /= s;
  const auto counts = type_counts(simulate_couples(benchmark_theta(), f, 200000, 21));
  const auto emp = empirical_density(counts);
  const auto pred = predicted_density(benchmark_theta(), f);
  for (int r = 0; r < kTypes; ++r)
    for (int c = 0; c < kTypes; ++c) EXPECT_NEAR(emp[r][c], pred[r][c], 3e-3);
}

TEST(Simulate, ZeroThetaGivesNoCrossAssociation) {
  const auto d = simulate_couples(ParamVector{}, uniform_types(), 50000, 4);
  for (const auto& s : cross_gamma_quartet()) EXPECT_LT(std::abs(kruskal_gamma(d, s).gamma), 0.02);
}

TEST(EquilibriumParams, PredictedDensityClearsBothSides) {
  TypeVector f{}, g{};
  for (int t = 0; t < kTypes; ++t) {
    f[t] = 1.0 + (t * 3) % 7;
    g[t] = 1.0 + (t * 5) % 4;
  }
  double sf = 0, sg = 0;
  for (int t = 0; t < kTypes; ++t) sf += f[t], sg += g[t];
  for (int t = 0; t < kTypes; ++t) f[t] /= sf, g[t] /= sg;
  const auto p = equilibrium_params(benchmark_theta(), f, g);
  EXPECT_EQ(p.offsets[0], 0.0);
  const auto d = predicted_density(p, f);
  for (int c = 0; c < kTypes; ++c) {
    double col = 0.0;
    for (int r = 0; r < kTypes; ++r) col += d[r][c];
    EXPECT_NEAR(col, g[c], 1e-9);
  }
}

TEST(Diagnostics, EfficiencyLossArithmetic) {
  EXPECT_NEAR(efficiency_loss(0.3952, 7.837), 4.8, 0.05);
  EXPECT_THROW(efficiency_loss(0.0, 0.0), DataError);
}

TEST(Diagnostics, IdenticalDensitiesHaveZeroDivergence) {
  const auto d = predicted_density(benchmark_theta(), uniform_types());
  const auto r = diagnostics(d, d);
  EXPECT_NEAR(r.kl_divergence, 0.0, 1e-12);
  EXPECT_NEAR(r.efficiency_loss_percent, 0.0, 1e-9);
  EXPECT_GT(r.shannon_entropy, 0.0);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(r.predicted_gammas[k], r.empirical_gammas[k], 1e-12);
}

TEST(Diagnostics, SupportViolationThrows) {
  auto emp = predicted_density(ParamVector{}, uniform_types());
  const auto pred = emp;
  emp[0][0] = 0.0;
  EXPECT_THROW(diagnostics(emp, pred), DataError);
}

TEST(TypeDistribution, HealthRowsEducationColumns) {
  Matrix m(5, std::vector<double>(5, 0.0));
  m[1][3] = 1.0;  // health 2, education 4
  const auto f = type_distribution(m);
  EXPECT_EQ(f[type_index(4, 2) - 1], 1.0);
  EXPECT_THROW(type_distribution(Matrix(4, std::vector<double>(5))), DataError);
}
