#pragma once

// psi_lambda^D, pixelized chaos measures and the dyadic binding-field martingale
//
//   Y_m(dx) = psi^S(x) prod_{j<=m} exp(beta Phi_j(x) - beta^2 Var Phi_j(x) / 2) dx,  beta = alpha lambda,
//
// where Phi_j is the binding field from the level-(j-1) dyadic squares of S onto
// their four children. Each Phi_j is the discrete binding field of a lattice
// square with L_j spacings per side, read at the pixel centres.

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "dgff/constants.hpp"
#include "dgff/continuum.hpp"
#include "dgff/potential.hpp"
#include "dgff/rng.hpp"
#include "dgff/spectral.hpp"
#include "dgff/stats.hpp"

namespace dgff {

// ---------------------------------------------------------------------------
// psi

enum class PsiMethod { analytic, lattice };

struct PsiWeight {
  ContinuumDomain domain;
  double lambda = 0.0;
  std::vector<Point> grid;
  std::vector<double> values;
};

inline double psi_value(const ContinuumDomain& domain, double lambda, Point x) {
  return std::exp(2.0 * lambda * lambda * log_conformal_radius(domain, x));
}

/// psi_lambda^D(x) = exp(2 lambda^2 int Pi^D(x, dz) log|x - z|) on each grid point.
inline PsiWeight psi(const ContinuumDomain& domain, double lambda, std::vector<Point> grid,
                     PsiMethod method = PsiMethod::analytic, std::vector<int> resolutions = {64, 128, 256}) {
  for (auto p : grid) require(domain.contains(p), Errc::domain, "psi: grid point outside the domain");
  PsiWeight w{domain, lambda, std::move(grid), {}};
  w.values.reserve(w.grid.size());
  if (method == PsiMethod::analytic) {
    for (auto p : w.grid) w.values.push_back(psi_value(domain, lambda, p));
  } else {
    const detail::LatticeLogIntegrator integ(domain, std::move(resolutions));
    for (auto p : w.grid) {
      const Point one[] = {p};
      w.values.push_back(std::exp(2.0 * lambda * lambda * integ.integrate(p, one)[0]));
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Quadrature of psi

namespace detail {

using Gauss20 = boost::math::quadrature::gauss<double, 20>;

template <class F>
double gauss_2d(F&& f, double x0, double x1, double y0, double y1, int panels) {
  double acc = 0.0;
  const double hx = (x1 - x0) / panels, hy = (y1 - y0) / panels;
  for (int i = 0; i < panels; ++i)
    for (int j = 0; j < panels; ++j) {
      const double ax = x0 + i * hx, ay = y0 + j * hy;
      acc += Gauss20::integrate([&](double y) { return Gauss20::integrate([&](double x) { return f(x, y); }, ax, ax + hx); },
                                ay, ay + hy);
    }
  return acc;
}

}  // namespace detail

/// int_cell psi_lambda^D for a rectangle cell inside one component of D.
inline double psi_integral(const ContinuumDomain& domain, double lambda, const BoundingBox& cell, int panels = 4) {
  return detail::gauss_2d([&](double x, double y) { return psi_value(domain, lambda, {x, y}); }, cell.x0, cell.x1, cell.y0,
                          cell.y1, panels);
}

/// int_D psi_lambda^D over the whole domain.
inline double psi_integral(const ContinuumDomain& domain, double lambda, int panels = 8) {
  double total = 0.0;
  for (const auto& c : domain.components()) {
    if (c.kind() == ContinuumDomain::Kind::disc) {
      const auto& p = c.params();
      const double cx = p[0], cy = p[1], r = p[2];
      total += detail::gauss_2d(
          [&](double rho, double theta) {
            return rho * psi_value(c, lambda, {cx + rho * std::cos(theta), cy + rho * std::sin(theta)});
          },
          0.0, r, 0.0, 2.0 * std::numbers::pi, panels);
    } else {
      const auto b = c.rect();
      total += detail::gauss_2d([&](double x, double y) { return psi_value(c, lambda, {x, y}); }, b.x0, b.x1, b.y0, b.y1,
                                panels);
    }
  }
  return total;
}

struct ScalingReport {
  double lambda = 0.0;
  double r = 1.0;
  double integral = 0.0;         // int_D psi^D
  double scaled_integral = 0.0;  // int_{rD + a} psi^{rD + a}
  double ratio = 1.0;
  double predicted = 1.0;        // r^{2 + 2 lambda^2}
  double relative_error = 0.0;
};

/// Compares int_{rD+a} psi^{rD+a} with r^{2+2 lambda^2} int_D psi^D.
inline ScalingReport scaling_check(const ContinuumDomain& domain, double lambda, double r, Point shift = {0.0, 0.0}) {
  require(r > 0.0, Errc::precondition, "scaling factor must be positive");
  ScalingReport s;
  s.lambda = lambda;
  s.r = r;
  s.integral = psi_integral(domain, lambda);
  s.scaled_integral = psi_integral(domain.transformed(r, shift), lambda);
  s.ratio = s.scaled_integral / s.integral;
  s.predicted = std::pow(r, 2.0 + 2.0 * lambda * lambda);
  s.relative_error = std::abs(s.ratio / s.predicted - 1.0);
  return s;
}

inline nlohmann::json to_json(const ScalingReport& s) {
  return {{"lambda", s.lambda},     {"r", s.r},       {"integral", s.integral}, {"scaled_integral", s.scaled_integral},
          {"ratio", s.ratio},       {"predicted", s.predicted}, {"relative_error", s.relative_error}};
}

// ---------------------------------------------------------------------------
// Chaos measures on a pixel grid

struct ChaosMeasure {
  ContinuumDomain domain;
  double beta = 0.0;
  int level = 0;
  std::vector<Point> pixels;
  double pixel_area = 0.0;
  std::vector<double> pixel_mass;
  std::vector<double> field;     // accumulated Gaussian field
  std::vector<double> variance;  // accumulated E[field^2]

  double total_mass() const {
    double s = 0.0;
    for (double m : pixel_mass) s += m;
    return s;
  }
  double mass(const std::function<bool(Point)>& in_set) const {
    double s = 0.0;
    for (std::size_t i = 0; i < pixels.size(); ++i)
      if (in_set(pixels[i])) s += pixel_mass[i];
    return s;
  }
};

/// Pixel area times an optional density (default 1): the level-0 measure.
inline ChaosMeasure base_measure(const ContinuumDomain& domain, double beta, std::vector<Point> pixels, double pixel_area,
                                 std::span<const double> density = {}) {
  require(density.empty() || density.size() == pixels.size(), Errc::contract, "density does not match the pixels");
  ChaosMeasure m{domain, beta, 0, std::move(pixels), pixel_area, {}, {}, {}};
  m.pixel_mass.assign(m.pixels.size(), pixel_area);
  if (!density.empty())
    for (std::size_t i = 0; i < density.size(); ++i) m.pixel_mass[i] *= density[i];
  m.field.assign(m.pixels.size(), 0.0);
  m.variance.assign(m.pixels.size(), 0.0);
  return m;
}

/// Multiplies in exp(beta incr - beta^2 var / 2); incr must be independent of the current state.
inline ChaosMeasure chaos_step(const ChaosMeasure& measure, std::span<const double> increment,
                               std::span<const double> increment_variance) {
  require(increment.size() == measure.pixels.size() && increment_variance.size() == measure.pixels.size(),
          Errc::contract, "chaos_step: increment does not match the pixels");
  ChaosMeasure out = measure;
  out.level = measure.level + 1;
  const double b = measure.beta;
  for (std::size_t i = 0; i < increment.size(); ++i) {
    require(increment_variance[i] >= 0.0, Errc::contract, "chaos_step: negative variance increment");
    out.pixel_mass[i] *= std::exp(b * increment[i] - 0.5 * b * b * increment_variance[i]);
    out.field[i] += increment[i];
    out.variance[i] += increment_variance[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dyadic hierarchy

struct DyadicHierarchyOptions {
  int pixels_per_side = 256;
  int min_lattice = 128;                     // lattice spacings per side of each parent square, at least
  std::size_t matrix_budget = std::size_t{1} << 21;  // entries of a per-level pixel-by-noise matrix
  double jitter = 1e-10;
};

namespace detail {

/// Binding field of the box {1..L-1}^2 onto its four quadrants (the complement of
/// the middle cross), read at P x P pixel sites (2i+1) L / (2P).
class CrossBindingPlan {
 public:
  CrossBindingPlan(int pixels, int lattice, std::size_t matrix_budget, double jitter) : p_(pixels), l_(lattice) {
    require(l_ % 2 == 0 && l_ >= 4 && l_ % (2 * p_) == 0, Errc::precondition, "lattice must be an even multiple of 2P");
    w_ = l_ - 1;
    c_ = l_ / 2;
    m_ = c_ - 1;
    n_cross_ = static_cast<std::size_t>(2 * w_ - 1);
    child_ = std::make_shared<const BoxSpectral>(m_, m_);
    const Eigen::MatrixXd gcc = cross_covariance();
    Eigen::LLT<Eigen::MatrixXd> llt(gcc);
    require(llt.info() == Eigen::Success, Errc::resource, "cross covariance factorization failed");
    cross_factor_ = llt.matrixL();
    const std::size_t npix = static_cast<std::size_t>(p_) * p_;
    if (npix * n_cross_ <= matrix_budget) {
      Eigen::MatrixXd f = extension_matrix() * cross_factor_;
      if (npix <= n_cross_) {
        // fewer pixels than noise terms: factor the pixel covariance directly
        Eigen::MatrixXd k = f * f.transpose();
        k.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> kl(k);
        if (kl.info() == Eigen::Success) f = kl.matrixL();
      }
      factor_ = std::move(f);
      variance_.resize(npix);
      for (std::size_t i = 0; i < npix; ++i) variance_[i] = factor_.row(static_cast<Eigen::Index>(i)).squaredNorm();
      cross_factor_.resize(0, 0);
    } else {
      variance_ = spectral_variance();
    }
  }

  int pixels() const { return p_; }
  int lattice() const { return l_; }
  bool matrix_mode() const { return factor_.size() > 0; }
  std::size_t noise_size() const { return matrix_mode() ? static_cast<std::size_t>(factor_.cols()) : n_cross_; }
  /// Variance per pixel, local row-major P x P.
  const std::vector<double>& variance() const { return variance_; }

  /// Samples `count` independent copies; column s holds square s's pixels (local row-major).
  Eigen::MatrixXd sample(Philox& gen, std::size_t count) const {
    Eigen::MatrixXd z(static_cast<Eigen::Index>(noise_size()), static_cast<Eigen::Index>(count));
    gen.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
    if (matrix_mode()) return factor_ * z;
    const Eigen::MatrixXd cross = cross_factor_.triangularView<Eigen::Lower>() * z;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(p_) * p_, static_cast<Eigen::Index>(count));
    for (std::size_t s = 0; s < count; ++s) {
      const auto hc = cross.col(static_cast<Eigen::Index>(s));
      for (int q = 0; q < 4; ++q) {
        const int ox = (q & 1) * c_, oy = (q >> 1) * c_;
        const auto ext = child_->harmonic_extension([&](int u1, int u2) {
          const auto k = cross_index(ox + u1, oy + u2);
          return k < 0 ? 0.0 : hc[k];
        });
        for_each_pixel_in(q, [&](std::size_t pix, int u1, int u2) {
          out(static_cast<Eigen::Index>(pix), static_cast<Eigen::Index>(s)) = ext[child_->index(u1, u2)];
        });
      }
    }
    return out;
  }

 private:
  // Position on the cross {x2 = c} u {x1 = c}, or -1.
  std::ptrdiff_t cross_index(int x1, int x2) const {
    if (x1 < 1 || x1 > w_ || x2 < 1 || x2 > w_) return -1;
    if (x2 == c_) return x1 - 1;
    if (x1 == c_) return w_ + (x2 - 1) - (x2 > c_ ? 1 : 0);
    return -1;
  }

  int pixel_coord(int i) const { return (2 * i + 1) * (l_ / (2 * p_)); }

  // f(pixel index, child-local u1, u2) over the pixels of quadrant q.
  template <class F>
  void for_each_pixel_in(int q, F&& f) const {
    const int qx = q & 1, qy = q >> 1;
    for (int i2 = 0; i2 < p_; ++i2) {
      const int x2 = pixel_coord(i2);
      if ((x2 > c_) != (qy == 1)) continue;
      for (int i1 = 0; i1 < p_; ++i1) {
        const int x1 = pixel_coord(i1);
        if ((x1 > c_) != (qx == 1)) continue;
        f(static_cast<std::size_t>(i2) * p_ + i1, x1 - qx * c_, x2 - qy * c_);
      }
    }
  }

  // G on the cross from the separable sine sum: G = S diag-blocks S^T.
  Eigen::MatrixXd cross_covariance() const {
    const int n = w_;
    Eigen::MatrixXd s(n, n), inv_mu(n, n);
    const double norm = std::sqrt(2.0 / (n + 1));
    for (int x = 1; x <= n; ++x)
      for (int k = 1; k <= n; ++k) s(x - 1, k - 1) = norm * std::sin(std::numbers::pi * x * k / (n + 1));
    for (int k1 = 1; k1 <= n; ++k1)
      for (int k2 = 1; k2 <= n; ++k2)
        inv_mu(k1 - 1, k2 - 1) =
            1.0 / (1.0 - 0.5 * (std::cos(std::numbers::pi * k1 / (n + 1)) + std::cos(std::numbers::pi * k2 / (n + 1))));
    const Eigen::VectorXd sc = s.row(c_ - 1).transpose();
    const Eigen::VectorXd sc2 = sc.cwiseProduct(sc);
    // row-row: sum_{k2} S(c,k2)^2 / mu(k1,k2) in the k1 modes; column-column by symmetry of the box
    const Eigen::VectorXd vr = inv_mu * sc2;
    const Eigen::MatrixXd rr = s * vr.asDiagonal() * s.transpose();
    const Eigen::VectorXd vc = inv_mu.transpose() * sc2;
    const Eigen::MatrixXd cc = s * vc.asDiagonal() * s.transpose();
    const Eigen::MatrixXd rc = s * sc.asDiagonal() * inv_mu * sc.asDiagonal() * s.transpose();
    // rr(x1, y1) = G((x1,c),(y1,c)); cc(x2, y2) = G((c,x2),(c,y2)); rc(x1, y2) = G((x1,c),(c,y2))
    const auto nc = static_cast<Eigen::Index>(n_cross_);
    Eigen::MatrixXd g(nc, nc);
    std::vector<std::pair<int, int>> sites;  // (x1, x2)
    for (int x1 = 1; x1 <= n; ++x1) sites.push_back({x1, c_});
    for (int x2 = 1; x2 <= n; ++x2)
      if (x2 != c_) sites.push_back({c_, x2});
    for (Eigen::Index i = 0; i < nc; ++i)
      for (Eigen::Index j = 0; j < nc; ++j) {
        const auto [a1, a2] = sites[static_cast<std::size_t>(i)];
        const auto [b1, b2] = sites[static_cast<std::size_t>(j)];
        if (a2 == c_ && b2 == c_) g(i, j) = rr(a1 - 1, b1 - 1);
        else if (a1 == c_ && b1 == c_) g(i, j) = cc(a2 - 1, b2 - 1);
        else if (a2 == c_) g(i, j) = rc(a1 - 1, b2 - 1);
        else g(i, j) = rc(b1 - 1, a2 - 1);
      }
    return 0.5 * (g + g.transpose());
  }

  // Pixel values as a linear map of the cross values (discrete Poisson kernel).
  Eigen::MatrixXd extension_matrix() const {
    const std::size_t npix = static_cast<std::size_t>(p_) * p_;
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(npix), static_cast<Eigen::Index>(n_cross_));
    for (int q = 0; q < 4; ++q) {
      const int ox = (q & 1) * c_, oy = (q >> 1) * c_;
      // ring points of the child that sit on the cross
      std::vector<std::pair<int, int>> ring;
      for (int u = 1; u <= m_; ++u) {
        ring.push_back({u, 0});
        ring.push_back({u, m_ + 1});
        ring.push_back({0, u});
        ring.push_back({m_ + 1, u});
      }
      for (const auto& [r1, r2] : ring) {
        const auto k = cross_index(ox + r1, oy + r2);
        if (k < 0) continue;
        const auto ext = child_->harmonic_extension([&](int u1, int u2) { return u1 == r1 && u2 == r2 ? 1.0 : 0.0; });
        for_each_pixel_in(q, [&](std::size_t pix, int u1, int u2) {
          e(static_cast<Eigen::Index>(pix), k) = ext[child_->index(u1, u2)];
        });
      }
    }
    return e;
  }

  // Var = G^{box}(p,p) - G^{child}(p,p).
  std::vector<double> spectral_variance() const {
    const auto parent = BoxSpectral(w_, w_).green_diagonal();
    const auto child = child_->green_diagonal();
    std::vector<double> v(static_cast<std::size_t>(p_) * p_);
    for (int q = 0; q < 4; ++q) {
      const int ox = (q & 1) * c_, oy = (q >> 1) * c_;
      for_each_pixel_in(q, [&](std::size_t pix, int u1, int u2) {
        const std::size_t ip = static_cast<std::size_t>(oy + u2 - 1) * w_ + (ox + u1 - 1);
        v[pix] = parent[ip] - child[child_->index(u1, u2)];
      });
    }
    return v;
  }

  int p_, l_, w_ = 0, c_ = 0, m_ = 0;
  std::size_t n_cross_ = 0;
  std::shared_ptr<const BoxSpectral> child_;
  Eigen::MatrixXd cross_factor_;
  Eigen::MatrixXd factor_;
  std::vector<double> variance_;
};

inline std::shared_ptr<const CrossBindingPlan> cross_binding_plan(int pixels, int lattice, std::size_t budget, double jitter) {
  static std::mutex m;
  static std::map<std::tuple<int, int, std::size_t, double>, std::shared_ptr<const CrossBindingPlan>> cache;
  {
    std::lock_guard lock(m);
    const auto it = cache.find({pixels, lattice, budget, jitter});
    if (it != cache.end()) return it->second;
  }
  auto plan = std::make_shared<const CrossBindingPlan>(pixels, lattice, budget, jitter);
  std::lock_guard lock(m);
  return cache.emplace(std::make_tuple(pixels, lattice, budget, jitter), std::move(plan)).first->second;
}

}  // namespace detail

/// Sampling plan for Y_1..Y_m on a dyadic square. Immutable and shareable across threads.
class DyadicHierarchy {
 public:
  DyadicHierarchy(DyadicSquare root, double lambda, int depth, DyadicHierarchyOptions opts = {})
      : root_(root), lambda_(lambda), depth_(depth), opts_(opts) {
    require(depth_ >= 1, Errc::precondition, "dyadic martingale needs m >= 1");
    require(lambda_ >= 0.0 && lambda_ < 1.0, Errc::precondition, "lambda must lie in [0, 1)");
    const int pps = opts_.pixels_per_side;
    require(pps >= 2 && (pps & (pps - 1)) == 0, Errc::precondition, "pixels per side must be a power of two");
    require((pps >> (depth_ - 1)) >= 2, Errc::precondition, "too few pixels for the requested depth");
    require(opts_.min_lattice >= 4 && (opts_.min_lattice & (opts_.min_lattice - 1)) == 0, Errc::precondition,
            "minimum lattice size must be a power of two");
    const double side = root_.side() / pps;
    pixel_area_ = side * side;
    const auto corner = root_.corner();
    pixels_.reserve(static_cast<std::size_t>(pps) * pps);
    for (int gy = 0; gy < pps; ++gy)
      for (int gx = 0; gx < pps; ++gx) pixels_.push_back({corner.x + (gx + 0.5) * side, corner.y + (gy + 0.5) * side});
    psi_ = psi(root_.to_domain(), lambda_, pixels_).values;
    for (int j = 1; j <= depth_; ++j) {
      const int p = pps >> (j - 1);
      levels_.push_back(detail::cross_binding_plan(p, std::max(2 * p, opts_.min_lattice), opts_.matrix_budget, opts_.jitter));
    }
    for (int j = 1; j <= depth_; ++j) level_variance_.push_back(scatter(j, levels_[static_cast<std::size_t>(j - 1)]->variance()));
  }

  const DyadicSquare& root() const { return root_; }
  double lambda() const { return lambda_; }
  double beta() const { return kAlpha * lambda_; }
  int depth() const { return depth_; }
  const std::vector<Point>& pixels() const { return pixels_; }
  double pixel_area() const { return pixel_area_; }
  const std::vector<double>& psi_values() const { return psi_; }
  /// Variance of the level-j binding field per pixel (global row-major).
  const std::vector<double>& level_variance(int j) const { return level_variance_.at(static_cast<std::size_t>(j - 1)); }
  int lattice(int j) const { return levels_.at(static_cast<std::size_t>(j - 1))->lattice(); }

  /// Level-j binding field on the whole pixel grid.
  std::vector<double> sample_level(int j, RngSpec rng) const {
    const auto& plan = *levels_.at(static_cast<std::size_t>(j - 1));
    Philox gen(rng.child(static_cast<std::uint64_t>(j)));
    const std::size_t squares = std::size_t{1} << (2 * (j - 1));
    const Eigen::MatrixXd local = plan.sample(gen, squares);
    std::vector<double> local_flat(local.data(), local.data() + local.size());
    return scatter(j, local_flat, squares);
  }

  /// Y_0(S), ..., Y_m(S) for one realization.
  std::vector<double> total_masses(RngSpec rng) const {
    std::vector<double> mass(pixels_.size());
    for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = psi_[i] * pixel_area_;
    std::vector<double> totals{sum(mass)};
    const double b = beta();
    for (int j = 1; j <= depth_; ++j) {
      const auto phi = sample_level(j, rng);
      const auto& var = level_variance(j);
      for (std::size_t i = 0; i < mass.size(); ++i) mass[i] *= std::exp(b * phi[i] - 0.5 * b * b * var[i]);
      totals.push_back(sum(mass));
    }
    return totals;
  }

  /// Y_1, ..., Y_m as pixel measures (Y_0 = psi dx is the starting point).
  std::vector<ChaosMeasure> run(RngSpec rng) const {
    std::vector<ChaosMeasure> out;
    ChaosMeasure y = base_measure(root_.to_domain(), beta(), pixels_, pixel_area_, psi_);
    for (int j = 1; j <= depth_; ++j) {
      y = chaos_step(y, sample_level(j, rng), level_variance(j));
      out.push_back(y);
    }
    return out;
  }

 private:
  static double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }

  // Local P x P blocks (one per level-(j-1) square, column s) to the global grid.
  std::vector<double> scatter(int j, const std::vector<double>& local, std::size_t squares = 0) const {
    const int pps = opts_.pixels_per_side;
    const int p = pps >> (j - 1);
    const int per_side = 1 << (j - 1);
    const std::size_t block = static_cast<std::size_t>(p) * p;
    const bool shared = squares == 0;  // one block replicated to every square
    std::vector<double> g(static_cast<std::size_t>(pps) * pps);
    for (int sy = 0; sy < per_side; ++sy)
      for (int sx = 0; sx < per_side; ++sx) {
        const std::size_t s = static_cast<std::size_t>(sy) * per_side + sx;
        const double* src = local.data() + (shared ? 0 : s * block);
        for (int i2 = 0; i2 < p; ++i2)
          for (int i1 = 0; i1 < p; ++i1)
            g[static_cast<std::size_t>(sy * p + i2) * pps + (sx * p + i1)] = src[static_cast<std::size_t>(i2) * p + i1];
      }
    return g;
  }

  DyadicSquare root_;
  double lambda_;
  int depth_;
  DyadicHierarchyOptions opts_;
  double pixel_area_ = 0.0;
  std::vector<Point> pixels_;
  std::vector<double> psi_;
  std::vector<std::shared_ptr<const detail::CrossBindingPlan>> levels_;
  std::vector<std::vector<double>> level_variance_;
};

inline std::vector<ChaosMeasure> dyadic_martingale(const DyadicSquare& s, double lambda, int m, RngSpec rng,
                                                   DyadicHierarchyOptions opts = {}) {
  return DyadicHierarchy(s, lambda, m, opts).run(rng);
}

// ---------------------------------------------------------------------------
// Level sets versus chaos

struct LqgComparison {
  KsResult ks;
  std::vector<double> levelset_normalized;  // sorted, mean 1
  std::vector<double> chaos_normalized;     // sorted, mean 1
};

/// KS comparison of the two mass samples after dividing each by its mean.
inline LqgComparison lqg_compare(std::span<const double> levelset_masses, std::span<const double> chaos_masses) {
  require(!levelset_masses.empty() && !chaos_masses.empty(), Errc::insufficient_data, "lqg_compare needs two samples");
  auto normalize = [](std::span<const double> v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    require(*hi > *lo, Errc::statistics, "lqg_compare: constant sample");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    require(mean > 0.0, Errc::statistics, "lqg_compare: sample mean is not positive");
    std::vector<double> out;
    for (double x : v) out.push_back(x / mean);
    std::sort(out.begin(), out.end());
    return out;
  };
  LqgComparison c;
  c.levelset_normalized = normalize(levelset_masses);
  c.chaos_normalized = normalize(chaos_masses);
  c.ks = two_sample_ks(c.levelset_normalized, c.chaos_normalized);
  return c;
}

inline nlohmann::json to_json(const LqgComparison& c) {
  return {{"statistic", c.ks.statistic},
          {"pvalue", c.ks.pvalue},
          {"n_levelset", c.ks.n1},
          {"n_chaos", c.ks.n2},
          {"levelset_cdf", c.levelset_normalized},
          {"chaos_cdf", c.chaos_normalized}};
}

}  // namespace dgff
