#pragma once

// Conditional-logit maximum likelihood for quadratic complementarities with
// worker-type offsets on the 5x5 education x health type grid: choice
// probabilities, likelihood derivatives, seeded simulated annealing with a
// Newton polish, a couple simulator, and fit diagnostics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "mmatch/association.hpp"
#include "mmatch/logit.hpp"
#include "mmatch/market.hpp"

namespace mmatch {

inline constexpr int kLevels = 5;
inline constexpr int kTypes = kLevels * kLevels;
inline constexpr int kAttrs = 2;  // (E, H)
inline constexpr int kParams = kAttrs * kAttrs + kTypes - 1;

/// Type index (1-based) of education level E and health level H, as in the
/// survey type table: types run through education first.
constexpr int type_index(int E, int H) { return kLevels * (H - 1) + E; }

/// Attribute vector (E, H) of a 1-based type index.
inline AttrVector type_attrs(int t) {
  if (t < 1 || t > kTypes) throw DataError("type index " + std::to_string(t) + " out of range");
  return {static_cast<double>((t - 1) % kLevels + 1), static_cast<double>((t - 1) / kLevels + 1)};
}

using TypeMatrix = std::array<std::array<double, kTypes>, kTypes>;  // [woman r][man c], 0-based
using TypeVector = std::array<double, kTypes>;

/// Complementarities theta[k][l] (women's attribute k, men's attribute l, both
/// in (E, H) order) and man-type offsets delta_c with delta_1 = 0.
struct ParamVector {
  std::array<std::array<double, kAttrs>, kAttrs> theta{};
  TypeVector offsets{};

  static ParamVector from_flat(const std::vector<double>& v) {
    if (v.size() != kParams) throw DataError("parameter vector must have 28 entries");
    ParamVector p;
    for (int k = 0; k < kAttrs; ++k)
      for (int l = 0; l < kAttrs; ++l) p.theta[k][l] = v[k * kAttrs + l];
    p.offsets[0] = 0.0;
    for (int c = 1; c < kTypes; ++c) p.offsets[c] = v[kAttrs * kAttrs + c - 1];
    return p;
  }

  std::vector<double> flat() const {
    std::vector<double> v(kParams);
    for (int k = 0; k < kAttrs; ++k)
      for (int l = 0; l < kAttrs; ++l) v[k * kAttrs + l] = theta[k][l];
    for (int c = 1; c < kTypes; ++c) v[kAttrs * kAttrs + c - 1] = offsets[c] - offsets[0];
    return v;
  }

  double theta_hh() const { return theta[1][1]; }
  double theta_he() const { return theta[1][0]; }
  double theta_eh() const { return theta[0][1]; }
  double theta_ee() const { return theta[0][0]; }
};

/// Benchmark complementarities: H,H .7625; H,E -.0375; E,H -.0226; E,E .5572
/// (women's attribute first).
inline ParamVector benchmark_theta() {
  ParamVector p;
  p.theta[0][0] = 0.5572;
  p.theta[0][1] = -0.0226;
  p.theta[1][0] = -0.0375;
  p.theta[1][1] = 0.7625;
  return p;
}

namespace detail {

struct TypeFeatures {
  std::array<AttrVector, kTypes> attrs;
  TypeFeatures() {
    for (int t = 0; t < kTypes; ++t) attrs[t] = type_attrs(t + 1);
  }
};

inline const TypeFeatures& features() {
  static const TypeFeatures f;
  return f;
}

inline double utility(const ParamVector& p, int r, int c) {
  const auto& x = features().attrs[r];
  const auto& y = features().attrs[c];
  double u = p.offsets[c] - p.offsets[0];
  for (int k = 0; k < kAttrs; ++k)
    for (int l = 0; l < kAttrs; ++l) u += p.theta[k][l] * x[k] * y[l];
  return u;
}

}  // namespace detail

/// Probabilities over the 25 man types for a woman of type r (1-based).
inline TypeVector choice_probabilities(const ParamVector& p, int r) {
  if (r < 1 || r > kTypes) throw DataError("woman type " + std::to_string(r) + " out of range");
  TypeVector u{};
  double umax = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < kTypes; ++c) {
    u[c] = detail::utility(p, r - 1, c);
    umax = std::max(umax, u[c]);
  }
  double s = 0.0;
  for (double& v : u) {
    v = std::exp(v - umax);
    s += v;
  }
  for (double& v : u) v /= s;
  return u;
}

inline TypeMatrix choice_matrix(const ParamVector& p) {
  TypeMatrix P{};
  for (int r = 0; r < kTypes; ++r) P[r] = choice_probabilities(p, r + 1);
  return P;
}

struct LogLikelihood {
  double constant = 0.0;  // sum_r n_r log f_m(r): free of parameters
  double choice = 0.0;    // sum_rc n_rc log p(r,c)
  double total() const { return constant + choice; }
};

namespace detail {

inline TypeVector row_totals(const TypeMatrix& counts) {
  TypeVector n{};
  for (int r = 0; r < kTypes; ++r)
    for (int c = 0; c < kTypes; ++c) {
      if (!(counts[r][c] >= 0.0)) throw DataError("negative count in type table");
      n[r] += counts[r][c];
    }
  return n;
}

/// Parameter-dependent part only; the hot loop of every optimizer.
inline double choice_loglik(const ParamVector& p, const TypeMatrix& counts, const TypeVector& n) {
  double ll = 0.0;
  for (int r = 0; r < kTypes; ++r) {
    if (n[r] <= 0.0) continue;
    double umax = -std::numeric_limits<double>::infinity();
    TypeVector u{};
    for (int c = 0; c < kTypes; ++c) {
      u[c] = utility(p, r, c);
      umax = std::max(umax, u[c]);
    }
    double s = 0.0;
    for (int c = 0; c < kTypes; ++c) s += std::exp(u[c] - umax);
    const double lse = umax + std::log(s);
    for (int c = 0; c < kTypes; ++c)
      if (counts[r][c] > 0.0) ll += counts[r][c] * (u[c] - lse);
  }
  return ll;
}

/// Feature vector of the (r, c) alternative in flat parameter order.
inline void feature(int r, int c, Eigen::VectorXd& z) {
  z.setZero(kParams);
  const auto& x = features().attrs[r];
  const auto& y = features().attrs[c];
  for (int k = 0; k < kAttrs; ++k)
    for (int l = 0; l < kAttrs; ++l) z[k * kAttrs + l] = x[k] * y[l];
  if (c > 0) z[kAttrs * kAttrs + c - 1] = 1.0;
}

}  // namespace detail

inline LogLikelihood log_likelihood(const ParamVector& p, const TypeMatrix& counts,
                                    const TypeVector& f_m) {
  const auto n = detail::row_totals(counts);
  double any = 0.0;
  for (double v : n) any += v;
  if (!(any > 0.0)) throw DataError("type table has no positive count");
  LogLikelihood ll;
  for (int r = 0; r < kTypes; ++r) {
    if (n[r] <= 0.0) continue;
    if (!(f_m[r] > 0.0))
      throw DataError("woman-type fraction is zero for type " + std::to_string(r + 1) +
                      " which has observations");
    ll.constant += n[r] * std::log(f_m[r]);
  }
  ll.choice = detail::choice_loglik(p, counts, n);
  return ll;
}

/// Analytic gradient of the choice log-likelihood in flat parameter order:
/// observed minus expected counts contracted with the alternative features.
inline std::vector<double> gradient(const ParamVector& p, const TypeMatrix& counts) {
  const auto n = detail::row_totals(counts);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(kParams), z;
  for (int r = 0; r < kTypes; ++r) {
    if (n[r] <= 0.0) continue;
    const auto pr = choice_probabilities(p, r + 1);
    for (int c = 0; c < kTypes; ++c) {
      const double w = counts[r][c] - n[r] * pr[c];
      if (w == 0.0) continue;
      detail::feature(r, c, z);
      g += w * z;
    }
  }
  return {g.data(), g.data() + kParams};
}

/// Hessian of the choice log-likelihood (negative semidefinite).
inline Eigen::MatrixXd hessian(const ParamVector& p, const TypeMatrix& counts) {
  const auto n = detail::row_totals(counts);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(kParams, kParams);
  Eigen::VectorXd z, zbar;
  for (int r = 0; r < kTypes; ++r) {
    if (n[r] <= 0.0) continue;
    const auto pr = choice_probabilities(p, r + 1);
    zbar.setZero(kParams);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(kParams, kParams);
    for (int c = 0; c < kTypes; ++c) {
      detail::feature(r, c, z);
      zbar += pr[c] * z;
      S.noalias() += pr[c] * z * z.transpose();
    }
    H.noalias() -= n[r] * (S - zbar * zbar.transpose());
  }
  return H;
}

enum class FitMethod { Annealing, Ascent };

struct FitConfig {
  FitMethod method = FitMethod::Annealing;
  std::uint64_t seed = 0;
  int restarts = 5;
  int iterations = 4000;       // annealing proposals per restart
  double t0 = 1e-2;            // initial temperature, log-likelihood per couple
  double cooling = 0.999;      // geometric factor per proposal
  double step = 0.1;           // proposal standard deviation
  double tol = 1e-10;          // Newton stop: max |gradient| / couples
  int max_newton = 100;
  int threads = 0;             // 0: one thread per restart
};

struct FitDiagnostics {
  double log_likelihood = 0.0;
  double kl_divergence = 0.0;     // bits
  double shannon_entropy = 0.0;   // bits, of the predicted distribution
  double efficiency_loss_percent = 0.0;
  std::array<double, 4> predicted_gammas{};  // H,H  H,E  E,H  E,E
  std::array<double, 4> empirical_gammas{};
};

struct FitResult {
  ParamVector params;
  LogLikelihood log_likelihood;
  std::vector<double> restart_objectives;  // annealing end points, per restart
  int best_restart = -1;
  int newton_steps = 0;
  double gradient_max = 0.0;
  std::optional<FitDiagnostics> diagnostics;  // empty when KL is undefined
  std::string diagnostics_note;
};

namespace detail {

/// Uniform double in [0,1) from the top 53 bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal by Box-Muller on uniform01, for platform-stable draws.
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline std::vector<double> anneal(const TypeMatrix& counts, const TypeVector& n, double N,
                                  const FitConfig& cfg, std::uint64_t restart, double& best_val) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(restart)};
  std::mt19937_64 rng(seq);
  std::vector<double> cur(kParams, 0.0);
  if (restart > 0)
    for (double& v : cur) v = 0.5 * standard_normal(rng);
  double cur_val = choice_loglik(ParamVector::from_flat(cur), counts, n);
  std::vector<double> best = cur;
  best_val = cur_val;
  double T = cfg.t0 * N;
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto k = static_cast<std::size_t>(rng() % kParams);
    std::vector<double> prop = cur;
    prop[k] += cfg.step * standard_normal(rng);
    const double val = choice_loglik(ParamVector::from_flat(prop), counts, n);
    if (!std::isfinite(val))
      throw NumericalError("non-finite objective during annealing at parameter " +
                           std::to_string(k) + "=" + format_number(prop[k]));
    const double u = uniform01(rng);
    if (val >= cur_val || u < std::exp((val - cur_val) / T)) {
      cur = std::move(prop);
      cur_val = val;
      if (cur_val > best_val) {
        best_val = cur_val;
        best = cur;
      }
    }
    T *= cfg.cooling;
  }
  return best;
}

}  // namespace detail

/// Newton ascent with backtracking; the objective is concave, so the result
/// is the global maximum once the gradient vanishes.
inline int newton_polish(ParamVector& p, const TypeMatrix& counts, double N, const FitConfig& cfg,
                         double& gmax) {
  const auto n = detail::row_totals(counts);
  double f = detail::choice_loglik(p, counts, n);
  int steps = 0;
  for (; steps < cfg.max_newton; ++steps) {
    const auto gv = gradient(p, counts);
    Eigen::Map<const Eigen::VectorXd> g(gv.data(), kParams);
    gmax = g.cwiseAbs().maxCoeff();
    if (gmax <= cfg.tol * std::max(1.0, N)) break;
    const Eigen::MatrixXd H = hessian(p, counts);
    Eigen::MatrixXd A = -H;
    A.diagonal().array() += 1e-12 * std::max(1.0, N);
    const Eigen::VectorXd dir = A.ldlt().solve(g);
    if (!dir.allFinite()) throw NumericalError("Newton direction is not finite");
    auto x = p.flat();
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      std::vector<double> y(kParams);
      for (int i = 0; i < kParams; ++i) y[i] = x[i] + t * dir[i];
      const auto q = ParamVector::from_flat(y);
      const double fy = detail::choice_loglik(q, counts, n);
      if (std::isfinite(fy) && fy >= f - 1e-12 * std::abs(f)) {
        p = q;
        moved = fy > f;
        f = fy;
        break;
      }
    }
    if (!moved) {
      const auto g2 = gradient(p, counts);
      gmax = 0.0;
      for (double v : g2) gmax = std::max(gmax, std::abs(v));
      ++steps;
      break;
    }
  }
  return steps;
}

inline TypeMatrix empirical_density(const TypeMatrix& counts) {
  double N = 0.0;
  for (const auto& row : counts)
    for (double v : row) N += v;
  TypeMatrix d{};
  for (int r = 0; r < kTypes; ++r)
    for (int c = 0; c < kTypes; ++c) d[r][c] = counts[r][c] / N;
  return d;
}

/// Joint density f_m(r) p(r, c | params).
inline TypeMatrix predicted_density(const ParamVector& p, const TypeVector& f_m) {
  const auto P = choice_matrix(p);
  TypeMatrix d{};
  for (int r = 0; r < kTypes; ++r)
    for (int c = 0; c < kTypes; ++c) d[r][c] = f_m[r] * P[r][c];
  return d;
}

inline double efficiency_loss(double kl, double entropy) {
  if (!(kl + entropy > 0.0)) throw DataError("efficiency loss undefined for KL+entropy <= 0");
  return 100.0 * kl / (kl + entropy);
}

/// The cross-spouse gamma quartet of a 25x25 joint type density.
inline std::array<double, 4> gamma_quartet(const TypeMatrix& density) {
  CoupleDataset data;
  for (int r = 0; r < kTypes; ++r)
    for (int c = 0; c < kTypes; ++c)
      if (density[r][c] > 0.0)
        data.records.push_back({density[r][c], type_attrs(r + 1), type_attrs(c + 1)});
  std::array<double, 4> out{};
  const auto specs = cross_gamma_quartet();
  for (int s = 0; s < 4; ++s) {
    const auto t = joint_table(data, specs[s].a, specs[s].b);
    out[s] = kruskal_gamma(t).gamma;
  }
  return out;
}

/// KL divergence sum(pred * log2(pred / emp)), entropy of the predicted
/// density, efficiency loss, and the gamma quartets of both densities.
inline FitDiagnostics diagnostics(const TypeMatrix& empirical, const TypeMatrix& predicted) {
  FitDiagnostics d;
  for (int r = 0; r < kTypes; ++r)
    for (int c = 0; c < kTypes; ++c) {
      const double e = empirical[r][c], p = predicted[r][c];
      if (e < 0.0 || p < 0.0) throw DataError("negative density cell");
      if (e > 0.0 && p == 0.0)
        throw DataError("support violation: empirical mass at type pair (" +
                        std::to_string(r + 1) + "," + std::to_string(c + 1) +
                        ") where the prediction is zero");
      if (p > 0.0 && e == 0.0)
        throw DataError("support violation: predicted mass at type pair (" +
                        std::to_string(r + 1) + "," + std::to_string(c + 1) +
                        ") where the empirical density is zero (divergence infinite)");
      if (p > 0.0) {
        d.kl_divergence += p * std::log2(p / e);
        d.shannon_entropy -= p * std::log2(p);
      }
    }
  d.efficiency_loss_percent = efficiency_loss(d.kl_divergence, d.shannon_entropy);
  d.predicted_gammas = gamma_quartet(predicted);
  d.empirical_gammas = gamma_quartet(empirical);
  return d;
}

inline FitResult fit_mle(const TypeMatrix& counts, const TypeVector& f_m, const FitConfig& cfg = {}) {
  const auto n = detail::row_totals(counts);
  double N = 0.0;
  for (double v : n) N += v;
  if (!(N > 0.0)) throw DataError("type table has no positive count");

  FitResult res;
  ParamVector start;
  if (cfg.method == FitMethod::Annealing) {
    const int R = std::max(1, cfg.restarts);
    std::vector<std::vector<double>> ends(R);
    res.restart_objectives.assign(R, 0.0);
    std::vector<std::exception_ptr> errors(R);
    auto work = [&](int r) {
      try {
        ends[r] = detail::anneal(counts, n, N, cfg, static_cast<std::uint64_t>(r),
                                 res.restart_objectives[r]);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    };
    const int T = cfg.threads > 0 ? std::min(cfg.threads, R) : R;
    for (int base = 0; base < R; base += T) {
      std::vector<std::thread> pool;
      for (int r = base; r < std::min(R, base + T); ++r) pool.emplace_back(work, r);
      for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    // Deterministic reduction: best objective, ties to the lowest restart.
    res.best_restart = 0;
    for (int r = 1; r < R; ++r)
      if (res.restart_objectives[r] > res.restart_objectives[res.best_restart]) res.best_restart = r;
    start = ParamVector::from_flat(ends[res.best_restart]);
  }
  res.params = start;
  res.newton_steps = newton_polish(res.params, counts, N, cfg, res.gradient_max);
  res.log_likelihood = log_likelihood(res.params, counts, f_m);
  try {
    auto d = diagnostics(empirical_density(counts), predicted_density(res.params, f_m));
    d.log_likelihood = res.log_likelihood.total();
    res.diagnostics = d;
  } catch (const DataError& e) {
    res.diagnostics_note = e.what();
  }
  return res;
}

/// Draws n couples: woman type from f_m, man type from the choice
/// probabilities. Fully determined by `seed`.
inline CoupleDataset simulate_couples(const ParamVector& p, const TypeVector& f_m, std::size_t n,
                                      std::uint64_t seed) {
  if (n == 0) throw DataError("number of couples must be positive");
  double fs = 0.0;
  for (double v : f_m) {
    if (!(v >= 0.0)) throw DataError("negative woman-type fraction");
    fs += v;
  }
  if (!(fs > 0.0)) throw DataError("woman-type fractions sum to zero");
  TypeVector fc{};
  double acc = 0.0;
  for (int r = 0; r < kTypes; ++r) fc[r] = (acc += f_m[r] / fs);
  const auto P = choice_matrix(p);
  TypeMatrix pc{};
  for (int r = 0; r < kTypes; ++r) {
    double a = 0.0;
    for (int c = 0; c < kTypes; ++c) pc[r][c] = (a += P[r][c]);
  }
  auto draw = [](const TypeVector& cdf, double u) {
    for (int k = 0; k < kTypes; ++k)
      if (u < cdf[k]) return k;
    for (int k = kTypes; k-- > 0;)
      if (k == 0 || cdf[k] > cdf[k - 1]) return k;  // u beyond round-off: last positive type
    return kTypes - 1;
  };
  std::mt19937_64 rng(seed);
  CoupleDataset data;
  data.x_labels = {"E", "H"};
  data.y_labels = {"E", "H"};
  data.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int r = draw(fc, detail::uniform01(rng));
    const int c = draw(pc[r], detail::uniform01(rng));
    data.records.push_back({1.0, type_attrs(r + 1), type_attrs(c + 1)});
  }
  return data;
}

/// 25x25 weighted type counts of a dataset whose attributes are (E, H) levels 1..5.
inline TypeMatrix type_counts(const CoupleDataset& data) {
  data.validate();
  TypeMatrix counts{};
  auto level = [](double v, std::size_t rec) {
    const double r = std::round(v);
    if (r < 1 || r > kLevels || std::abs(r - v) > 1e-9)
      throw DataError("record " + std::to_string(rec + 1) + ": level " + format_number(v) +
                      " outside 1..5");
    return static_cast<int>(r);
  };
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    if (rec.x.size() != kAttrs || rec.y.size() != kAttrs)
      throw DataError("couple records need two attributes (E,H) per spouse");
    const int r = type_index(level(rec.x[0], i), level(rec.x[1], i));
    const int c = type_index(level(rec.y[0], i), level(rec.y[1], i));
    counts[r - 1][c - 1] += rec.weight;
  }
  return counts;
}

/// Woman-type fractions (row shares) of a count table.
inline TypeVector woman_fractions(const TypeMatrix& counts) {
  const auto n = detail::row_totals(counts);
  double N = 0.0;
  for (double v : n) N += v;
  TypeVector f{};
  for (int r = 0; r < kTypes; ++r) f[r] = N > 0.0 ? n[r] / N : 0.0;
  return f;
}

/// Type distribution from a 5x5 health (rows) x education (columns) table.
inline TypeVector type_distribution(const Matrix& health_by_education) {
  if (health_by_education.size() != kLevels) throw DataError("type table must be 5x5");
  TypeVector f{};
  for (int h = 1; h <= kLevels; ++h) {
    if (health_by_education[h - 1].size() != kLevels) throw DataError("type table must be 5x5");
    for (int e = 1; e <= kLevels; ++e) f[type_index(e, h) - 1] = health_by_education[h - 1][e - 1];
  }
  return f;
}

/// Complementarities `theta` completed with the man-type offsets that clear
/// the market for woman-type distribution f_w and man-type distribution g_m
/// (unit scale): the equilibrium worker potentials, first type pinned to 0.
inline ParamVector equilibrium_params(const ParamVector& theta, const TypeVector& f_w,
                                      const TypeVector& g_m, const LogitConfig& cfg = {}) {
  Matrix th(kAttrs, std::vector<double>(kAttrs));
  for (int k = 0; k < kAttrs; ++k)
    for (int l = 0; l < kAttrs; ++l) th[k][l] = theta.theta[k][l];
  DiscreteMeasure F, G;
  F.dimension = G.dimension = kAttrs;
  for (int t = 0; t < kTypes; ++t) {
    if (f_w[t] > 0.0) F.atoms.push_back({type_attrs(t + 1), f_w[t]});
    if (g_m[t] > 0.0) G.atoms.push_back({type_attrs(t + 1), g_m[t]});
  }
  if (G.atoms.size() != kTypes) throw DataError("every man type needs positive mass");
  LogitConfig c = cfg;
  c.sigma_delta = 1.0;
  const auto sol = ipf_equilibrium(OutputSpec::quadratic(th), F, G, c);
  ParamVector p = theta;
  const double base = sol.worker_potential.at(type_attrs(1));
  for (int t = 0; t < kTypes; ++t) p.offsets[t] = sol.worker_potential.at(type_attrs(t + 1)) - base;
  return p;
}

}  // namespace mmatch
