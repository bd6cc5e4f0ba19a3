#pragma once

// Estimators tying level-set samples to their limit laws: overshoot rate,
// spatial intensity, cluster profile, b-factorization, and two-sample KS.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <nlohmann/json.hpp>

#include "dgff/constants.hpp"
#include "dgff/levelset.hpp"
#include "dgff/potential.hpp"

namespace dgff {

// ---------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov

struct KsResult {
  double statistic = 0.0;
  double pvalue = 1.0;
  std::size_t n1 = 0, n2 = 0;
};

/// Q_KS(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
inline double kolmogorov_tail(double x) {
  if (x < 1e-3) return 1.0;
  if (x < 1.18) {
    // small-x form from the Jacobi theta identity converges faster here
    const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * x * x));
    double s = 0.0;
    for (int k = 1; k <= 9; k += 2) s += std::pow(y, k * k);
    return 1.0 - std::sqrt(2.0 * std::numbers::pi) / x * s;
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double t = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 1.0 : -1.0) * t;
    if (t < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// Sup-distance of the empirical CDFs with the asymptotic p-value
/// Q_KS((sqrt(ne) + 0.12 + 0.11/sqrt(ne)) D), ne = n1 n2 / (n1 + n2).
inline KsResult two_sample_ks(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= 20 && b.size() >= 20, Errc::insufficient_data, "two-sample KS needs at least 20 values per sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
  }
  const double ne = n1 * n2 / (n1 + n2);
  const double sq = std::sqrt(ne);
  return {d, kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d), x.size(), y.size()};
}

inline nlohmann::json to_json(const KsResult& r) {
  return {{"statistic", r.statistic}, {"pvalue", r.pvalue}, {"n1", r.n1}, {"n2", r.n2}};
}

// ---------------------------------------------------------------------------
// Overshoot law

struct OvershootFit {
  double rate_hat = 0.0;
  double stderr_ = 0.0;
  std::size_t n_atoms = 0;
  double h_max = 0.0;
  double target = 0.0;  // alpha lambda, when known
};

namespace detail {

// Mean of the exponential law with rate rho truncated to [0, H].
inline double truncated_exp_mean(double rho, double H) {
  const double t = rho * H;
  if (std::abs(t) < 1e-5) return H * (0.5 - t / 12.0);
  return 1.0 / rho - H / std::expm1(t);
}

// Fisher information per observation for the truncated exponential.
inline double truncated_exp_information(double rho, double H) {
  const double t = rho * H;
  if (std::abs(t) < 1e-4) return H * H / 12.0;
  const double e = std::expm1(t);
  return 1.0 / (rho * rho) - H * H * (e + 1.0) / (e * e);
}

}  // namespace detail

/// MLE of the rate of an exponential truncated to [0, h_max] from the given overshoots.
inline OvershootFit fit_overshoot(std::span<const double> overshoots, double h_max) {
  require(h_max > 0.0, Errc::precondition, "overshoot window must be positive");
  double sum = 0.0;
  std::size_t n = 0;
  for (double h : overshoots)
    if (h >= 0.0 && h <= h_max) {
      sum += h;
      ++n;
    }
  require(n >= 100, Errc::insufficient_data, "overshoot fit needs at least 100 atoms in the window");
  const double mean = sum / static_cast<double>(n);
  require(mean > 0.0 && mean < h_max, Errc::statistics, "overshoot sample is degenerate");
  // the truncated mean decreases in rho from h_max (rho -> -inf) to 0 (rho -> inf)
  auto f = [&](double rho) { return detail::truncated_exp_mean(rho, h_max) - mean; };
  double lo = -1.0 / h_max, hi = 1.0 / h_max;
  while (f(lo) < 0.0) lo *= 2.0;
  while (f(hi) > 0.0) hi *= 2.0;
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  const double rho = 0.5 * (a + b);
  OvershootFit fit;
  fit.rate_hat = rho;
  fit.stderr_ = 1.0 / std::sqrt(static_cast<double>(n) * detail::truncated_exp_information(rho, h_max));
  fit.n_atoms = n;
  fit.h_max = h_max;
  return fit;
}

/// Pooled fit with the default window h_max = 3 / (alpha lambda).
inline OvershootFit fit_overshoot(std::span<const PointMeasure> pms) {
  require(!pms.empty(), Errc::insufficient_data, "no point measures to fit");
  const double lambda = pms.front().lambda;
  std::vector<double> h;
  for (const auto& pm : pms)
    for (const auto& a : pm.atoms) h.push_back(a.overshoot);
  auto fit = fit_overshoot(h, 3.0 / (kAlpha * lambda));
  fit.target = kAlpha * lambda;
  return fit;
}

inline nlohmann::json to_json(const OvershootFit& f) {
  return {{"rate_hat", f.rate_hat}, {"stderr", f.stderr_}, {"n_atoms", f.n_atoms}, {"h_max", f.h_max}, {"target", f.target}};
}

// ---------------------------------------------------------------------------
// Spatial intensity

/// Dyadic cells of side 2^-level lying inside the delta-interior of D.
inline std::vector<BoundingBox> interior_cells(const ContinuumDomain& domain, double delta, int level) {
  const double side = std::ldexp(1.0, -level);
  const auto b = domain.bbox();
  std::vector<BoundingBox> out;
  const auto i0 = static_cast<long>(std::floor(b.y0 / side)), i1 = static_cast<long>(std::ceil(b.y1 / side));
  const auto j0 = static_cast<long>(std::floor(b.x0 / side)), j1 = static_cast<long>(std::ceil(b.x1 / side));
  for (long i = i0; i < i1; ++i)
    for (long j = j0; j < j1; ++j) {
      const BoundingBox c{j * side, i * side, (j + 1) * side, (i + 1) * side};
      const Point corners[] = {{c.x0, c.y0}, {c.x1, c.y0}, {c.x0, c.y1}, {c.x1, c.y1}};
      const int comp = domain.component_index(corners[0]);
      bool inside = comp >= 0;
      for (auto p : corners) inside = inside && domain.component_index(p) == comp && domain.dist_inf_to_complement(p) >= delta;
      if (inside) out.push_back(c);
    }
  return out;
}

struct IntensityReport {
  std::vector<BoundingBox> cells;
  std::vector<double> density;       // mean over replicas of (atoms in cell) / K_N
  std::vector<double> density_se;
  std::vector<double> psi_integral;
  std::vector<double> ratio;
  std::vector<double> ratio_se;
  std::vector<bool> excluded;        // cells without atoms or with zero psi mass
  std::size_t replicas = 0;
  double flatness = 0.0;             // max/min ratio - 1 over included cells
};

/// Streams replicas into per-cell normalized counts.
class IntensityAccumulator {
 public:
  explicit IntensityAccumulator(std::vector<BoundingBox> cells) : cells_(std::move(cells)), s1_(cells_.size()), s2_(cells_.size()) {}

  void add(const PointMeasure& pm) {
    std::vector<double> c(cells_.size(), 0.0);
    for (const auto& a : pm.atoms) {
      if (a.overshoot < 0.0) continue;
      for (std::size_t k = 0; k < cells_.size(); ++k) {
        const auto& b = cells_[k];
        if (a.position.x >= b.x0 && a.position.x < b.x1 && a.position.y >= b.y0 && a.position.y < b.y1) {
          c[k] += pm.weight;
          break;
        }
      }
    }
    add_counts(c);
  }

  /// Normalized counts per cell for one replica.
  void add_counts(std::span<const double> c) {
    require(c.size() == cells_.size(), Errc::contract, "intensity: wrong number of cells");
    for (std::size_t k = 0; k < c.size(); ++k) {
      s1_[k] += c[k];
      s2_[k] += c[k] * c[k];
    }
    ++n_;
  }

  const std::vector<BoundingBox>& cells() const { return cells_; }

  IntensityReport report(std::span<const double> psi_integrals) const {
    require(psi_integrals.size() == cells_.size(), Errc::contract, "intensity: psi integrals do not match the cells");
    require(n_ >= 2, Errc::insufficient_data, "intensity needs at least two replicas");
    IntensityReport r;
    r.cells = cells_;
    r.replicas = n_;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      const double n = static_cast<double>(n_);
      const double m = s1_[k] / n;
      const double var = std::max(0.0, (s2_[k] - n * m * m) / (n - 1.0));
      r.density.push_back(m);
      r.density_se.push_back(std::sqrt(var / n));
      r.psi_integral.push_back(psi_integrals[k]);
      const bool skip = m <= 0.0 || psi_integrals[k] <= 0.0;
      r.excluded.push_back(skip);
      r.ratio.push_back(skip ? 0.0 : m / psi_integrals[k]);
      r.ratio_se.push_back(skip ? 0.0 : r.density_se.back() / psi_integrals[k]);
      if (!skip) {
        lo = std::min(lo, r.ratio.back());
        hi = std::max(hi, r.ratio.back());
      }
    }
    require(hi > 0.0, Errc::insufficient_data, "intensity: every cell is empty");
    r.flatness = hi / lo - 1.0;
    return r;
  }

 private:
  std::vector<BoundingBox> cells_;
  std::vector<double> s1_, s2_;
  std::size_t n_ = 0;
};

inline IntensityReport intensity_ratio(std::span<const PointMeasure> pms, std::span<const double> psi_integrals,
                                       std::vector<BoundingBox> cells) {
  IntensityAccumulator acc(std::move(cells));
  for (const auto& pm : pms) acc.add(pm);
  return acc.report(psi_integrals);
}

inline nlohmann::json to_json(const IntensityReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) cells.push_back({c.x0, c.y0, c.x1, c.y1});
  return {{"cells", cells},       {"density", r.density}, {"density_se", r.density_se}, {"psi_integral", r.psi_integral},
          {"ratio", r.ratio},     {"ratio_se", r.ratio_se}, {"excluded", r.excluded},   {"replicas", r.replicas},
          {"flatness", r.flatness}};
}

// ---------------------------------------------------------------------------
// Cluster law

struct ClusterReport {
  std::vector<Site> lags;             // Lambda_r(0) minus the origin, row-major
  std::vector<double> mean_profile;
  Eigen::MatrixXd cov_profile;
  std::vector<double> predicted_mean;
  Eigen::MatrixXd predicted_cov;
  std::size_t n_atoms = 0;
  double max_mean_rel_error = 0.0;
  double max_cov_rel_error = 0.0;     // over entries, relative to the largest predicted entry of each row
};

/// Streams atoms with overshoot in [0, log log N] into profile moments.
class ClusterAccumulator {
 public:
  ClusterAccumulator(int r, int n) : r_(r), n_(n), size_(static_cast<std::size_t>(2 * r + 1) * (2 * r + 1)) {
    require(r >= 1, Errc::precondition, "cluster report needs lag radius >= 1");
    s1_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size_));
    s2_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size_), static_cast<Eigen::Index>(size_));
  }

  double window() const { return std::log(std::log(static_cast<double>(n_))); }

  void add(const PointMeasure& pm) {
    require(pm.r >= r_, Errc::precondition, "point measure profile radius is smaller than the requested lags");
    const double top = window();
    Eigen::VectorXd v(static_cast<Eigen::Index>(size_));
    for (const auto& a : pm.atoms) {
      if (a.overshoot < 0.0 || a.overshoot > top) continue;
      for (int dz2 = -r_; dz2 <= r_; ++dz2)
        for (int dz1 = -r_; dz1 <= r_; ++dz1)
          v[static_cast<Eigen::Index>(PointMeasure::profile_index(r_, dz1, dz2))] =
              a.profile[PointMeasure::profile_index(pm.r, dz1, dz2)];
      add_profile(v);
    }
  }

  void add_profile(const Eigen::VectorXd& v) {
    s1_ += v;
    s2_.selfadjointView<Eigen::Lower>().rankUpdate(v);
    ++count_;
  }

  /// Adds the moments of another accumulator with the same radius and N.
  void merge(const ClusterAccumulator& other) {
    require(other.r_ == r_ && other.n_ == n_, Errc::contract, "cluster accumulators differ in radius or N");
    s1_ += other.s1_;
    s2_ += other.s2_;
    count_ += other.count_;
  }

  std::size_t count() const { return count_; }
  int radius() const { return r_; }

  Eigen::VectorXd mean() const { return s1_ / static_cast<double>(count_); }
  Eigen::MatrixXd covariance() const {
    const double n = static_cast<double>(count_);
    const Eigen::VectorXd m = mean();
    Eigen::MatrixXd c = s2_.selfadjointView<Eigen::Lower>();
    return (c - n * m * m.transpose()) / (n - 1.0);
  }

  ClusterReport report(const PotentialKernelTable& kernel, double lambda) const {
    require(count_ >= 2, Errc::insufficient_data, "cluster report needs at least two atoms in the window");
    ClusterReport rep;
    rep.n_atoms = count_;
    std::vector<Eigen::Index> idx;
    for (int dz2 = -r_; dz2 <= r_; ++dz2)
      for (int dz1 = -r_; dz1 <= r_; ++dz1) {
        if (dz1 == 0 && dz2 == 0) continue;
        rep.lags.push_back({dz1, dz2});
        idx.push_back(static_cast<Eigen::Index>(PointMeasure::profile_index(r_, dz1, dz2)));
      }
    const auto k = static_cast<Eigen::Index>(rep.lags.size());
    const Eigen::VectorXd m = mean();
    const Eigen::MatrixXd c = covariance();
    rep.cov_profile.resize(k, k);
    rep.predicted_cov.resize(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const Site z = rep.lags[static_cast<std::size_t>(i)];
      rep.mean_profile.push_back(m[idx[static_cast<std::size_t>(i)]]);
      rep.predicted_mean.push_back(kAlpha * lambda * kernel(z));
      for (Eigen::Index j = 0; j < k; ++j) {
        const Site w = rep.lags[static_cast<std::size_t>(j)];
        rep.cov_profile(i, j) = c(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        rep.predicted_cov(i, j) = kernel(z) + kernel(w) - kernel(z - w);
      }
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto s = static_cast<std::size_t>(i);
      rep.max_mean_rel_error =
          std::max(rep.max_mean_rel_error, std::abs(rep.mean_profile[s] - rep.predicted_mean[s]) / rep.predicted_mean[s]);
      const double scale = rep.predicted_cov.row(i).cwiseAbs().maxCoeff();
      for (Eigen::Index j = 0; j < k; ++j)
        rep.max_cov_rel_error =
            std::max(rep.max_cov_rel_error, std::abs(rep.cov_profile(i, j) - rep.predicted_cov(i, j)) / scale);
    }
    return rep;
  }

 private:
  int r_, n_;
  std::size_t size_;
  Eigen::VectorXd s1_;
  Eigen::MatrixXd s2_;
  std::size_t count_ = 0;
};

inline ClusterReport cluster_report(std::span<const PointMeasure> pms, const PotentialKernelTable& kernel, double lambda,
                                    int r = 3) {
  require(!pms.empty(), Errc::insufficient_data, "no point measures for the cluster report");
  ClusterAccumulator acc(r, pms.front().n);
  for (const auto& pm : pms) acc.add(pm);
  return acc.report(kernel, lambda);
}

inline nlohmann::json to_json(const ClusterReport& r) {
  nlohmann::json lags = nlohmann::json::array();
  for (auto z : r.lags) lags.push_back({z.x, z.y});
  auto mat = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
      rows.push_back(row);
    }
    return rows;
  };
  return {{"lags", lags},
          {"mean_profile", r.mean_profile},
          {"predicted_mean", r.predicted_mean},
          {"cov_profile", mat(r.cov_profile)},
          {"predicted_cov", mat(r.predicted_cov)},
          {"n_atoms", r.n_atoms},
          {"max_mean_rel_error", r.max_mean_rel_error},
          {"max_cov_rel_error", r.max_cov_rel_error}};
}

// ---------------------------------------------------------------------------
// b-factorization of the level-set counts

struct FactorizationReport {
  double b = 0.0;
  double lambda = 0.0;
  double mean_ratio = 1.0;             // E|Gamma(b)| / E|Gamma(0)|
  double predicted = 1.0;              // exp(-alpha lambda b)
  double relative_discrepancy = 0.0;   // mean_ratio / predicted - 1
  double ratio_se = 0.0;
  std::vector<double> per_replica;     // |Gamma(b)| e^{alpha lambda b} / |Gamma(0)| - 1, replicas with |Gamma(0)| > 0
};

/// From per-replica counts at thresholds 0 and b.
inline FactorizationReport factorization_check(std::span<const double> count0, std::span<const double> countb, double b,
                                               double lambda) {
  require(count0.size() == countb.size() && !count0.empty(), Errc::contract, "factorization: count vectors differ in length");
  FactorizationReport r;
  r.b = b;
  r.lambda = lambda;
  r.predicted = std::exp(-kAlpha * lambda * b);
  const double n = static_cast<double>(count0.size());
  double s0 = 0, sb = 0, s00 = 0, sbb = 0, s0b = 0;
  for (std::size_t i = 0; i < count0.size(); ++i) {
    s0 += count0[i];
    sb += countb[i];
    s00 += count0[i] * count0[i];
    sbb += countb[i] * countb[i];
    s0b += count0[i] * countb[i];
    if (count0[i] > 0) r.per_replica.push_back(countb[i] / (r.predicted * count0[i]) - 1.0);
  }
  require(s0 > 0.0, Errc::insufficient_data, "factorization: no level-set points at threshold 0");
  const double m0 = s0 / n, mb = sb / n;
  r.mean_ratio = mb / m0;
  r.relative_discrepancy = r.mean_ratio / r.predicted - 1.0;
  if (count0.size() >= 2) {
    // delta method for a ratio of correlated means
    const double v0 = (s00 - n * m0 * m0) / (n - 1), vb = (sbb - n * mb * mb) / (n - 1), c = (s0b - n * m0 * mb) / (n - 1);
    const double rel = vb / (mb * mb) + v0 / (m0 * m0) - 2 * c / (m0 * mb);
    r.ratio_se = r.mean_ratio * std::sqrt(std::max(0.0, rel) / n);
  }
  return r;
}

/// From point measures extracted at a threshold no larger than min(0, b).
inline FactorizationReport factorization_check(std::span<const PointMeasure> pms, double b) {
  require(!pms.empty(), Errc::insufficient_data, "no point measures for the factorization check");
  std::vector<double> c0, cb;
  for (const auto& pm : pms) {
    require(pm.threshold <= std::min(0.0, b), Errc::precondition,
            "point measure was extracted above the requested threshold");
    double a0 = 0, ab = 0;
    for (const auto& a : pm.atoms) {
      a0 += a.overshoot >= 0.0 ? 1 : 0;
      ab += a.overshoot >= b ? 1 : 0;
    }
    c0.push_back(a0);
    cb.push_back(ab);
  }
  return factorization_check(c0, cb, b, pms.front().lambda);
}

inline nlohmann::json to_json(const FactorizationReport& r) {
  return {{"b", r.b},
          {"lambda", r.lambda},
          {"mean_ratio", r.mean_ratio},
          {"predicted", r.predicted},
          {"relative_discrepancy", r.relative_discrepancy},
          {"ratio_se", r.ratio_se}};
}

}  // namespace dgff
