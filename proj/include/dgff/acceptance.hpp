#pragma once

// Acceptance criteria 1-10. Each returns one pass/fail record with the measured
// quantities; tolerances are fixed here. Expensive ensembles shared between
// criteria are cached in an AcceptanceContext.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgff/ensemble.hpp"
#include "dgff/potential.hpp"
#include "dgff/spectral.hpp"

namespace dgff {

struct Criterion {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string summary;    // one line of measured values against tolerances
  nlohmann::json details;
  double seconds = 0.0;
};

inline nlohmann::json to_json(const Criterion& c) {
  return {{"id", c.id}, {"name", c.name}, {"passed", c.passed}, {"summary", c.summary}, {"details", c.details}, {"seconds", c.seconds}};
}

inline std::string format_line(const Criterion& c) {
  char head[96];
  std::snprintf(head, sizeof head, "AC%-2d %s  %-28s", c.id, c.passed ? "PASS" : "FAIL", c.name.c_str());
  char tail[32];
  std::snprintf(tail, sizeof tail, "  [%.1f s]", c.seconds);
  return std::string(head) + c.summary + tail;
}

namespace detail {

inline std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

template <class F>
Criterion timed(int id, std::string name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Criterion c{id, std::move(name)};
  try {
    body(c);
  } catch (const std::exception& e) {
    c.passed = false;
    c.summary = std::string("error: ") + e.what();
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

inline LatticeDomainPtr box_domain(int x0, int y0, int w, int h) {
  return std::make_shared<const LatticeDomain>(LatticeDomain::box(x0, y0, w, h));
}

/// First-moment quantities at finite N on the unit square, from the exact
/// site variances: E|Gamma_N(b)| = sum_x P(h_x >= a_N + b), and the overshoot
/// density on [0, h_max] proportional to sum_x phi_x(a_N + t).
class FiniteNMoments {
 public:
  FiniteNMoments(int n, double lambda) : a_(CenteringSchedule::canonical(lambda).a(n)) {
    const auto d = discretize(ContinuumDomain::unit_square(), n);
    const auto box = d.as_box();
    require(box.has_value(), Errc::contract, "unit square discretization is not a box");
    for (double v : BoxSpectral(box->w, box->h).green_diagonal()) sd_.push_back(std::sqrt(v));
  }

  double expected_count(double b) const {
    double s = 0.0;
    for (double sd : sd_) s += 0.5 * std::erfc((a_ + b) / (sd * std::numbers::sqrt2));
    return s;
  }

  /// Rate of the truncated exponential whose mean matches the exact overshoot law on [0, h_max].
  double overshoot_rate(double h_max, int nodes = 400) const {
    double s0 = 0.0, s1 = 0.0;
    for (int i = 0; i < nodes; ++i) {
      const double t = (i + 0.5) * h_max / nodes;
      double dens = 0.0;
      for (double sd : sd_) {
        const double z = (a_ + t) / sd;
        dens += std::exp(-0.5 * z * z) / sd;
      }
      s0 += dens;
      s1 += dens * t;
    }
    const double mean = s1 / s0;
    double lo = 1e-6, hi = 100.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (truncated_exp_mean(mid, h_max) > mean ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  double a_;
  std::vector<double> sd_;
};

}  // namespace detail

/// Fixed tolerances and sizes of the suite.
struct AcceptanceSettings {
  std::uint64_t seed = 20241017;
  double exact_tol = 1e-8;
  int max_square = 16;
  double kernel_e1_tol = 1e-6;
  double kernel_spread_tol = 1e-2;
  int sampler_samples = 100000;
  double sampler_k_se = 5.0;
  std::vector<int> daviaud_n{128, 256, 512};
  std::vector<double> daviaud_lambda{0.2, 0.4};
  int daviaud_replicas = 100;
  double daviaud_tol = 0.15;
  int big_n = 512;
  double lambda_main = 0.3;
  int main_replicas = 200;
  double overshoot_tol = 0.10;
  double factorization_tol = 0.10;
  double cluster_tol = 0.15;
  double lambda_intensity = 0.25;
  int intensity_replicas = 500;
  double intensity_delta = 0.1;
  int intensity_level = 3;
  double flatness_tol = 0.15;
  int chaos_runs = 10000;
  int chaos_depth = 7;
  double chaos_k_se = 5.0;
  double scaling_tol = 0.01;
  int compare_replicas = 500;
  int compare_small_n = 128;
  double ks_alpha = 0.01;
};

/// Caches ensembles used by more than one criterion.
class AcceptanceContext {
 public:
  explicit AcceptanceContext(AcceptanceSettings s = {}) : s_(std::move(s)) {}
  const AcceptanceSettings& settings() const { return s_; }

  /// N = 512, lambda = 0.3: counts at b = 0, +1, -1, overshoots, cluster profiles.
  const std::vector<LevelsetSummary>& main_ensemble() {
    if (main_.empty()) main_ = LevelsetEnsemble(main_plan()).run(s_.seed, static_cast<std::size_t>(s_.main_replicas));
    return main_;
  }
  LevelsetPlan main_plan() const {
    LevelsetPlan p;
    p.lambda = s_.lambda_main;
    p.n = s_.big_n;
    p.thresholds = {0.0, 1.0, -1.0};
    p.overshoot_cap = 3.0 / (kAlpha * s_.lambda_main);
    p.cluster = true;
    return p;
  }

  /// lambda = 0.25 at N: counts at b = 0 and, at N = 512, per-cell masses.
  const std::vector<LevelsetSummary>& quarter_ensemble(int n) {
    auto& slot = quarter_[n];
    if (slot.empty()) {
      LevelsetPlan p;
      p.lambda = s_.lambda_intensity;
      p.n = n;
      p.r = 0;
      if (n == s_.big_n) p.cells = intensity_cells();
      slot = LevelsetEnsemble(p).run(s_.seed + 1, static_cast<std::size_t>(s_.intensity_replicas));
    }
    return slot;
  }
  std::vector<BoundingBox> intensity_cells() const {
    return interior_cells(ContinuumDomain::unit_square(), s_.intensity_delta, s_.intensity_level);
  }

 private:
  AcceptanceSettings s_;
  std::vector<LevelsetSummary> main_;
  std::map<int, std::vector<LevelsetSummary>> quarter_;
};

// ---------------------------------------------------------------------------

/// Green identity G = -a(x-y) + sum_z H(x,z) a(y-z) on squares, and G^U = G^V + Cov(phi^{U,V}) on nested squares.
inline Criterion criterion_exact_potential(AcceptanceContext& ctx) {
  return detail::timed(1, "exact potential theory", [&](Criterion& c) {
    const auto& s = ctx.settings();
    const auto kernel = potential_kernel(2 * s.max_square + 2);
    double identity_err = 0.0;
    for (int side = 2; side <= s.max_square; side += 2) {
      const auto d = detail::box_domain(0, 0, side, side);
      const GreenOperator g(d);
      const Eigen::MatrixXd G = g.dense();
      for (std::size_t i = 0; i < d->size(); ++i) {
        const Site x = d->sites()[i];
        const auto hm = harmonic_measure(g, x);
        for (std::size_t j = 0; j < d->size(); ++j) {
          const Site y = d->sites()[j];
          double rhs = -kernel(x - y);
          for (std::size_t b = 0; b < hm.points.size(); ++b) rhs += hm.weights[b] * kernel(y - hm.points[b]);
          identity_err = std::max(identity_err, std::abs(G(Eigen::Index(i), Eigen::Index(j)) - rhs));
        }
      }
    }
    double additivity_err = 0.0;
    const int n = s.max_square;
    for (auto [x0, y0, w, h] : std::vector<std::array<int, 4>>{{1, 1, n - 2, n - 2}, {0, 0, n / 2, n}, {3, 2, 5, 9}, {4, 4, 4, 4}}) {
      const GreenOperator gu(detail::box_domain(0, 0, n, n));
      const GreenOperator gv(detail::box_domain(x0, y0, w, h));
      const Eigen::MatrixXd binding = discrete_binding_covariance(gu, gv);
      const Eigen::MatrixXd GV = gv.dense();
      const auto& sub = gv.domain();
      for (std::size_t i = 0; i < sub.size(); ++i)
        for (std::size_t j = 0; j < sub.size(); ++j) {
          const double lhs = gu.entry(sub.sites()[i], sub.sites()[j]);
          additivity_err = std::max(additivity_err, std::abs(lhs - GV(Eigen::Index(i), Eigen::Index(j)) -
                                                                 binding(Eigen::Index(i), Eigen::Index(j))));
        }
    }
    c.details = {{"identity_max_error", identity_err}, {"additivity_max_error", additivity_err}, {"tolerance", s.exact_tol}};
    c.passed = identity_err < s.exact_tol && additivity_err < s.exact_tol;
    c.summary = "identity err " + detail::fmt("%.2e", identity_err) + ", additivity err " + detail::fmt("%.2e", additivity_err) +
                " (tol " + detail::fmt("%.0e", s.exact_tol) + ")";
  });
}

/// a(e1) against the box-Green limit, and the spread of a(x) - g log|x| over 50 <= |x| <= 100.
inline Criterion criterion_potential_kernel(AcceptanceContext& ctx) {
  return detail::timed(2, "potential kernel", [&](Criterion& c) {
    const auto& s = ctx.settings();
    // G(0,0) - G(0,e1) on boxes of half-width r; the error is O(r^-2)
    auto diff = [](int r) {
      const BoxSpectral b(2 * r + 1, 2 * r + 1);
      const int m = r + 1;
      return b.green_entry(m, m, m, m) - b.green_entry(m, m, m + 1, m);
    };
    const std::vector<int> rs{64, 128, 256};
    const std::vector<double> vals{diff(64), diff(128), diff(256)};
    const double oracle = richardson(rs, vals);
    const double e1 = potential_kernel_value({1, 0});
    const auto table = potential_kernel(128);
    double lo = 1e300, hi = -1e300;
    for (int x = 0; x <= 100; ++x)
      for (int y = 0; y <= x; ++y) {
        const double r = std::hypot(double(x), double(y));
        if (r < 50.0 || r > 100.0) continue;
        const double v = table({x, y}) - kG * std::log(r);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    const double e1_err = std::abs(e1 - 1.0), oracle_err = std::abs(oracle - 1.0);
    c.details = {{"a_e1", e1}, {"oracle", oracle}, {"spread", hi - lo}};
    c.passed = e1_err < s.kernel_e1_tol && oracle_err < s.kernel_e1_tol && hi - lo < s.kernel_spread_tol;
    c.summary = "a(e1)-1 " + detail::fmt("%.1e", e1 - 1.0) + ", oracle-1 " + detail::fmt("%.1e", oracle - 1.0) +
                " (tol 1e-6), spread " + detail::fmt("%.2e", hi - lo) + " (tol 1e-2)";
  });
}

/// Dense, spectral and Gibbs-Markov samplers on a 6x6 box: pairwise entrywise covariance agreement.
inline Criterion criterion_samplers(AcceptanceContext& ctx) {
  return detail::timed(3, "sampler agreement", [&](Criterion& c) {
    const auto& s = ctx.settings();
    const auto box = detail::box_domain(0, 0, 6, 6);
    const GreenOperator g(box);
    const GibbsMarkovSampler gm(box, {detail::box_domain(0, 0, 3, 3), detail::box_domain(4, 0, 2, 3),
                                      detail::box_domain(0, 4, 3, 2), detail::box_domain(4, 4, 2, 2)});
    const auto n = static_cast<Eigen::Index>(box->size());
    auto collect = [&](std::uint64_t tag, const std::function<std::vector<double>(RngSpec)>& draw) {
      Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(n, n);
      for (int r = 0; r < s.sampler_samples; ++r) {
        const auto v = draw(RngSpec{s.seed, static_cast<std::uint64_t>(r)}.child(tag));
        const Eigen::Map<const Eigen::VectorXd> x(v.data(), n);
        cross.selfadjointView<Eigen::Lower>().rankUpdate(x);
      }
      Eigen::MatrixXd full = cross.selfadjointView<Eigen::Lower>();
      return Eigen::MatrixXd(full / s.sampler_samples);
    };
    const std::vector<Eigen::MatrixXd> est{collect(1, [&](RngSpec r) { return sample_dense(g, r).values; }),
                                           collect(2, [&](RngSpec r) { return sample_box_spectral(box, r).values; }),
                                           collect(3, [&](RngSpec r) { return gm.sample(r).values; })};
    const Eigen::MatrixXd exact = g.dense();
    double worst = 0.0;
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = a + 1; b < 3; ++b)
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = 0; j < n; ++j) {
            // two independent estimates: the difference has twice the single-estimate variance
            const double se = std::sqrt(2.0 * (exact(i, i) * exact(j, j) + exact(i, j) * exact(i, j)) / s.sampler_samples);
            worst = std::max(worst, std::abs(est[a](i, j) - est[b](i, j)) / se);
          }
    c.details = {{"max_pairwise_z", worst}, {"samples", s.sampler_samples}};
    c.passed = worst < s.sampler_k_se;
    c.summary = "max pairwise |dC|/SE " + detail::fmt("%.2f", worst) + " (tol 5)";
  });
}

/// Slope of log E|Gamma_N(0)| against log N.
inline Criterion criterion_daviaud(AcceptanceContext& ctx) {
  return detail::timed(4, "level-set size exponent", [&](Criterion& c) {
    const auto& s = ctx.settings();
    bool ok = true;
    std::string line;
    c.details = nlohmann::json::array();
    for (double lambda : s.daviaud_lambda) {
      std::vector<double> means;
      for (int n : s.daviaud_n) {
        LevelsetPlan p;
        p.lambda = lambda;
        p.n = n;
        p.r = 0;
        means.push_back(mean_of(counts_at(LevelsetEnsemble(p).run(s.seed + 2, static_cast<std::size_t>(s.daviaud_replicas)), 0)));
      }
      const double slope = log_log_slope(s.daviaud_n, means);
      const double target = 2.0 * (1.0 - lambda * lambda);
      ok = ok && std::abs(slope - target) <= s.daviaud_tol;
      c.details.push_back({{"lambda", lambda}, {"N", s.daviaud_n}, {"mean_count", means}, {"slope", slope}, {"target", target}});
      line += "lambda " + detail::fmt("%.1f", lambda) + ": slope " + detail::fmt("%.3f", slope) + " vs " +
              detail::fmt("%.2f", target) + "; ";
    }
    c.passed = ok;
    c.summary = line + "(tol 0.15)";
  });
}

/// Truncated-exponential fit of pooled overshoots.
inline Criterion criterion_overshoot(AcceptanceContext& ctx) {
  return detail::timed(5, "overshoot law", [&](Criterion& c) {
    const auto& s = ctx.settings();
    const auto& ens = ctx.main_ensemble();
    auto fit = fit_overshoot(pooled_overshoots(ens), ctx.main_plan().overshoot_cap);
    fit.target = kAlpha * s.lambda_main;
    const double rel = std::abs(fit.rate_hat - fit.target) / fit.target;
    // the same statistic under the exact one-site laws at this N, for context only
    const double finite_n = detail::FiniteNMoments(s.big_n, s.lambda_main).overshoot_rate(fit.h_max);
    c.details = to_json(fit);
    c.details["finite_n_rate"] = finite_n;
    c.passed = rel < s.overshoot_tol;
    c.summary = "rate " + detail::fmt("%.4f", fit.rate_hat) + " +- " + detail::fmt("%.4f", fit.stderr_) + " vs " +
                detail::fmt("%.4f", fit.target) + ", rel err " + detail::fmt("%.3f", rel) + " (tol 0.10); exact at this N " +
                detail::fmt("%.4f", finite_n);
  });
}

/// E|Gamma(b)| / E|Gamma(0)| against exp(-alpha lambda b) for b = +1 and -1.
inline Criterion criterion_factorization(AcceptanceContext& ctx) {
  return detail::timed(6, "b-ratio", [&](Criterion& c) {
    const auto& s = ctx.settings();
    const auto& ens = ctx.main_ensemble();
    const auto c0 = counts_at(ens, 0);
    const auto up = factorization_check(c0, counts_at(ens, 1), 1.0, s.lambda_main);
    const auto down = factorization_check(c0, counts_at(ens, 2), -1.0, s.lambda_main);
    const detail::FiniteNMoments exact(s.big_n, s.lambda_main);
    const double e0 = exact.expected_count(0.0);
    const double fin_up = exact.expected_count(1.0) / e0 / up.predicted - 1.0;
    const double fin_down = exact.expected_count(-1.0) / e0 / down.predicted - 1.0;
    c.details = {{"b=+1", to_json(up)}, {"b=-1", to_json(down)},
                 {"finite_n_discrepancy", {{"b=+1", fin_up}, {"b=-1", fin_down}}}};
    c.passed = std::abs(up.relative_discrepancy) < s.factorization_tol && std::abs(down.relative_discrepancy) < s.factorization_tol;
    c.summary = "b=+1 ratio/target-1 " + detail::fmt("%+.3f", up.relative_discrepancy) + ", b=-1 " +
                detail::fmt("%+.3f", down.relative_discrepancy) + " (tol 0.10); exact at this N " + detail::fmt("%+.3f", fin_up) +
                ", " + detail::fmt("%+.3f", fin_down);
  });
}

/// Mean and covariance of h(x) - h(x+z) around level-set points, |z|_inf <= 3.
inline Criterion criterion_cluster(AcceptanceContext& ctx) {
  return detail::timed(7, "cluster law", [&](Criterion& c) {
    const auto& s = ctx.settings();
    const auto& ens = ctx.main_ensemble();
    const auto acc = merged_cluster(ens, 3, s.big_n);
    const auto rep = acc.report(potential_kernel(8), s.lambda_main);
    c.details = to_json(rep);
    c.passed = rep.max_mean_rel_error < s.cluster_tol && rep.max_cov_rel_error < s.cluster_tol;
    c.summary = "mean rel err " + detail::fmt("%.3f", rep.max_mean_rel_error) + ", cov rel err " +
                detail::fmt("%.3f", rep.max_cov_rel_error) + " (tol 0.15), atoms " + std::to_string(rep.n_atoms);
  });
}

/// Per-cell density / psi-integral ratios over interior dyadic cells.
inline Criterion criterion_intensity(AcceptanceContext& ctx) {
  return detail::timed(8, "intensity shape", [&](Criterion& c) {
    const auto& s = ctx.settings();
    const auto cells = ctx.intensity_cells();
    std::vector<double> psi_int;
    for (const auto& cell : cells) psi_int.push_back(psi_integral(ContinuumDomain::unit_square(), s.lambda_intensity, cell));
    const auto rep = merged_intensity(ctx.quarter_ensemble(s.big_n), cells).report(psi_int);
    c.details = to_json(rep);
    c.passed = rep.flatness < s.flatness_tol;
    c.summary = "max/min - 1 = " + detail::fmt("%.3f", rep.flatness) + " over " + std::to_string(cells.size()) +
                " cells (tol 0.15)";
  });
}

/// E[Y_m] = Y_0 for m <= 7, and the r^{2+2 lambda^2} scaling of the psi integral.
inline Criterion criterion_chaos(AcceptanceContext& ctx) {
  return detail::timed(9, "chaos martingale", [&](Criterion& c) {
    const auto& s = ctx.settings();
    const DyadicHierarchy h({0, 0, 0}, s.lambda_main, s.chaos_depth);
    const auto totals = chaos_total_masses(h, s.seed + 3, static_cast<std::size_t>(s.chaos_runs));
    const double y0 = totals.front().front();
    double worst = 0.0;
    std::vector<double> means, ses;
    for (int m = 1; m <= s.chaos_depth; ++m) {
      double s1 = 0, s2 = 0;
      for (const auto& t : totals) {
        s1 += t[static_cast<std::size_t>(m)];
        s2 += t[static_cast<std::size_t>(m)] * t[static_cast<std::size_t>(m)];
      }
      const double n = static_cast<double>(totals.size());
      const double mean = s1 / n, se = std::sqrt((s2 / n - mean * mean) / (n - 1.0));
      means.push_back(mean);
      ses.push_back(se);
      worst = std::max(worst, std::abs(mean - y0) / se);
    }
    const auto t0 = std::chrono::steady_clock::now();
    double scaling_err = 0.0;
    nlohmann::json scaling = nlohmann::json::array();
    for (double r : {0.5, 0.25}) {
      const auto rep = scaling_check(ContinuumDomain::unit_square(), s.lambda_main, r, {0.1, 0.2});
      scaling_err = std::max(scaling_err, rep.relative_error);
      scaling.push_back(to_json(rep));
    }
    const double scaling_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.details = {{"y0", y0}, {"mean", means}, {"se", ses}, {"max_z", worst}, {"runs", s.chaos_runs},
                 {"scaling", scaling}, {"scaling_seconds", scaling_seconds}};
    c.passed = worst < s.chaos_k_se && scaling_err < s.scaling_tol && scaling_seconds < 5.0;
    c.summary = "max |E Y_m - Y_0|/SE " + detail::fmt("%.2f", worst) + " (tol 5), scaling rel err " +
                detail::fmt("%.1e", scaling_err) + " (tol 1e-2) in " + detail::fmt("%.2f", scaling_seconds) + " s";
  });
}

/// KS comparison of alpha lambda |Gamma_N(0)| / K_N against Y_7 on the unit square.
inline Criterion criterion_lqg(AcceptanceContext& ctx) {
  return detail::timed(10, "LQG comparison", [&](Criterion& c) {
    const auto& s = ctx.settings();
    const double lambda = s.lambda_intensity;
    const DyadicHierarchy h({0, 0, 0}, lambda, s.chaos_depth);
    std::vector<double> chaos;
    for (const auto& t : chaos_total_masses(h, s.seed + 4, static_cast<std::size_t>(s.compare_replicas))) chaos.push_back(t.back());
    auto levelset_masses = [&](int n) {
      std::vector<double> out;
      for (const auto& x : ctx.quarter_ensemble(n)) out.push_back(kAlpha * lambda * x.counts[0] * x.weight);
      return out;
    };
    const auto big = lqg_compare(levelset_masses(s.big_n), chaos);
    const auto small = lqg_compare(levelset_masses(s.compare_small_n), chaos);
    c.details = {{"N" + std::to_string(s.big_n), to_json(big)}, {"N" + std::to_string(s.compare_small_n), to_json(small)}};
    // equality is only asymptotic: accept a non-rejection, or else a p-value that grows with N
    const bool accepted = big.ks.pvalue >= s.ks_alpha;
    const bool improving = big.ks.pvalue > small.ks.pvalue;
    c.passed = accepted || improving;
    c.summary = "p(N=" + std::to_string(s.big_n) + ") " + detail::fmt("%.3g", big.ks.pvalue) + ", p(N=" +
                std::to_string(s.compare_small_n) + ") " + detail::fmt("%.3g", small.ks.pvalue) +
                (accepted ? " (not rejected at 0.01)" : improving ? " (rejected; p improves with N)" : " (rejected; no improvement)");
  });
}

}  // namespace dgff
