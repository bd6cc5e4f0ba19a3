#pragma once

// Discrete potential theory of the simple random walk on Z^2: Green functions
// of finite domains, the potential kernel, harmonic measure, harmonic
// extension, and the binding-field covariance C^{D, D~}.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <boost/math/quadrature/gauss.hpp>

#include "dgff/constants.hpp"
#include "dgff/continuum.hpp"
#include "dgff/domain.hpp"
#include "dgff/error.hpp"
#include "dgff/field.hpp"

namespace dgff {

/// Killed-walk Green function G^D = (I - P)^{-1}, held as a sparse Cholesky
/// factor of the precision I - P. Copies share the factorization.
class GreenOperator {
 public:
  static constexpr std::size_t kDenseLimit = 16384;

  explicit GreenOperator(LatticeDomainPtr domain) : domain_(std::move(domain)) {
    require(domain_ && domain_->size() >= 1, Errc::precondition, "green() needs a non-empty domain");
    const auto& sites = domain_->sites();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(sites.size() * 5);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
      for (auto o : kNeighborOffsets) {
        const auto j = domain_->index_of(sites[i] + o);
        if (j >= 0) trips.emplace_back(static_cast<int>(i), static_cast<int>(j), -0.25);
      }
    }
    auto state = std::make_shared<State>();
    state->precision.resize(static_cast<int>(sites.size()), static_cast<int>(sites.size()));
    state->precision.setFromTriplets(trips.begin(), trips.end());
    state->llt.compute(state->precision);
    // I - P is strictly diagonally dominant on rows next to the boundary and irreducible per component
    require(state->llt.info() == Eigen::Success, Errc::contract, "Green operator: singular killed-walk system");
    state_ = std::move(state);
  }

  explicit GreenOperator(const LatticeDomain& domain) : GreenOperator(std::make_shared<const LatticeDomain>(domain)) {}

  const LatticeDomain& domain() const { return *domain_; }
  const LatticeDomainPtr& domain_ptr() const { return domain_; }
  std::size_t size() const { return domain_->size(); }
  const Eigen::SparseMatrix<double>& precision() const { return state_->precision; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return state_->llt.solve(rhs); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return state_->llt.solve(rhs); }

  Eigen::VectorXd column(std::size_t j) const {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
    e[static_cast<Eigen::Index>(j)] = 1.0;
    return solve(e);
  }

  /// G(x, y); zero when either site is outside the domain.
  double entry(Site x, Site y) const {
    const auto i = domain_->index_of(x), j = domain_->index_of(y);
    if (i < 0 || j < 0) return 0.0;
    return column(static_cast<std::size_t>(j))[i];
  }

  Eigen::MatrixXd dense() const {
    require(size() <= kDenseLimit, Errc::resource, "dense Green matrix requested for a domain that is too large");
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd g = solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n)));
    return 0.5 * (g + g.transpose());
  }

  /// P^T L^{-T} z where P (I - P_walk) P^T = L L^T; covariance G for white z.
  Eigen::VectorXd correlate(std::span<const double> white) const {
    require(white.size() == size(), Errc::contract, "correlate: wrong noise length");
    const Eigen::Map<const Eigen::VectorXd> z(white.data(), static_cast<Eigen::Index>(white.size()));
    Eigen::VectorXd y = state_->llt.matrixU().solve(z);
    return state_->llt.permutationPinv() * y;
  }

 private:
  struct State {
    Eigen::SparseMatrix<double> precision;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
  };
  LatticeDomainPtr domain_;
  std::shared_ptr<const State> state_;
};

inline GreenOperator green(const LatticeDomain& domain) { return GreenOperator(domain); }

// ---------------------------------------------------------------------------
// Potential kernel a(x) = sum_n [P^n(0,0) - P^n(0,x)], a(0) = 0, a(e1) = 1.
//
// With cosh t = 2 - cos(theta) the theta_1 integral of the Fourier
// representation is done in closed form, leaving
//
//   a(x) = (2/pi) int_0^pi (1 - e^{-m t} cos(n theta)) / sinh t  d theta,
//
// m = max(|x1|,|x2|), n = min(|x1|,|x2|). The integrand is analytic on [0, pi].

inline double potential_kernel_value(Site x) {
  const int m = std::max(std::abs(x.x), std::abs(x.y));
  const int n = std::min(std::abs(x.x), std::abs(x.y));
  if (m == 0) return 0.0;
  auto integrand = [m, n](double theta) {
    const double s = std::sin(0.5 * theta);
    const double u = 2.0 * s * s;  // cosh t - 1
    const double sinh_t = std::sqrt(u * (u + 2.0));
    if (sinh_t == 0.0) return static_cast<double>(m);
    const double t = std::log1p(u + sinh_t);
    const double sn = std::sin(0.5 * n * theta);
    const double num = -std::expm1(-m * t) + std::exp(-m * t) * 2.0 * sn * sn;
    return num / sinh_t;
  };
  const int panels = 16 + (m + n) / 2;
  const double width = std::numbers::pi / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p)
    total += boost::math::quadrature::gauss<double, 30>::integrate(integrand, p * width, (p + 1) * width);
  return 2.0 / std::numbers::pi * total;
}

/// a(x) on the square [-R, R]^2 with the asymptotic constant estimated from the tail.
class PotentialKernelTable {
 public:
  static constexpr int kMaxRadius = 2048;

  explicit PotentialKernelTable(int radius) : radius_(radius) {
    require(radius >= 1, Errc::precondition, "potential_kernel needs radius >= 1");
    require(radius <= kMaxRadius, Errc::resource, "potential_kernel radius exceeds the memory budget");
    const int side = 2 * radius_ + 1;
    values_.assign(static_cast<std::size_t>(side) * side, 0.0);
    // one evaluation per orbit of the lattice symmetry group
    for (int a = 0; a <= radius_; ++a) {
      for (int b = 0; b <= a; ++b) {
        const double v = potential_kernel_value({a, b});
        for (int sa : {-1, 1})
          for (int sb : {-1, 1}) {
            set({sa * a, sb * b}, v);
            set({sb * b, sa * a}, v);
          }
      }
    }
    const double lo = std::min(50.0, radius_ / 2.0);
    double sum = 0.0;
    std::size_t count = 0;
    for (int y = -radius_; y <= radius_; ++y)
      for (int x = -radius_; x <= radius_; ++x) {
        const double r = std::hypot(x, y);
        if (r >= lo && r <= radius_) {
          sum += (*this)({x, y}) - kG * std::log(r);
          ++count;
        }
      }
    c0_ = count ? sum / count : 0.0;
  }

  int radius() const { return radius_; }
  double c0_estimate() const { return c0_; }
  bool in_table(Site x) const { return std::abs(x.x) <= radius_ && std::abs(x.y) <= radius_; }

  /// Tabulated value, falling back to direct evaluation outside the table.
  double operator()(Site x) const {
    if (!in_table(x)) return potential_kernel_value(x);
    return values_[index(x)];
  }

  /// max |a(x) - mean of a over the four neighbours| over tabulated x != 0 with tabulated neighbours.
  double max_harmonic_residual() const {
    double worst = 0.0;
    for (int y = -radius_ + 1; y < radius_; ++y)
      for (int x = -radius_ + 1; x < radius_; ++x) {
        if (x == 0 && y == 0) continue;
        double mean = 0.0;
        for (auto o : kNeighborOffsets) mean += 0.25 * (*this)(Site{x, y} + o);
        worst = std::max(worst, std::abs(mean - (*this)({x, y})));
      }
    return worst;
  }

  /// x1,x2,a_value for every tabulated site.
  void write_csv(std::ostream& os) const {
    os << "x1,x2,a_value\n";
    os.precision(17);
    for (int y = -radius_; y <= radius_; ++y)
      for (int x = -radius_; x <= radius_; ++x) os << x << ',' << y << ',' << (*this)({x, y}) << '\n';
  }

 private:
  std::size_t index(Site x) const {
    return static_cast<std::size_t>(x.y + radius_) * (2 * radius_ + 1) + static_cast<std::size_t>(x.x + radius_);
  }
  void set(Site x, double v) { values_[index(x)] = v; }

  int radius_;
  std::vector<double> values_;
  double c0_ = 0.0;
};

inline PotentialKernelTable potential_kernel(int radius) { return PotentialKernelTable(radius); }

// ---------------------------------------------------------------------------

/// Exit distribution H^D(x, .) over the outer boundary of D.
struct HarmonicMeasureRow {
  Site source;
  std::vector<Site> points;
  std::vector<double> weights;
};

/// Last-exit decomposition: H(x, z) = sum_{x' ~ z, x' in D} G(x, x') / 4.
inline HarmonicMeasureRow harmonic_measure(const GreenOperator& g, Site x) {
  const auto& dom = g.domain();
  const auto ix = dom.index_of(x);
  require(ix >= 0, Errc::domain, "harmonic_measure: source is not a site of the domain");
  const Eigen::VectorXd col = g.column(static_cast<std::size_t>(ix));
  HarmonicMeasureRow row{x, dom.boundary(), {}};
  row.weights.reserve(row.points.size());
  for (auto z : row.points) {
    double w = 0.0;
    for (auto o : kNeighborOffsets) {
      const auto j = dom.index_of(z + o);
      if (j >= 0) w += 0.25 * col[j];
    }
    row.weights.push_back(w);
  }
  return row;
}

inline HarmonicMeasureRow harmonic_measure(const LatticeDomain& domain, Site x) {
  require(domain.contains(x), Errc::domain, "harmonic_measure: source is not a site of the domain");
  return harmonic_measure(GreenOperator(domain), x);
}

/// Values outside `sub` come from `outer`; inside, the discrete harmonic
/// function with that data. `sub_green` must be the Green operator of `sub`.
inline Eigen::VectorXd harmonic_extension(const GreenOperator& sub_green, const std::function<double(Site)>& outer) {
  const auto& sub = sub_green.domain();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sub.size()));
  for (std::size_t i = 0; i < sub.size(); ++i) {
    const Site s = sub.sites()[i];
    for (auto o : kNeighborOffsets) {
      const Site t = s + o;
      if (!sub.contains(t)) rhs[static_cast<Eigen::Index>(i)] += 0.25 * outer(t);
    }
  }
  return sub_green.solve(rhs);
}

/// Harmonic extension into sub of data on domain.sites \ sub.sites (taken from
/// `outer`) and on domain.boundary (`boundary_values`, aligned with
/// domain.boundary(); zero when empty). Returns a field on `domain`.
inline Field harmonic_extension(const LatticeDomainPtr& domain, const LatticeDomainPtr& sub, const Field& outer,
                                std::span<const double> boundary_values = {}) {
  require(sub->is_subset_of(*domain), Errc::domain, "harmonic_extension: sub is not contained in domain");
  require(outer.domain && outer.domain->size() == domain->size(), Errc::contract,
          "harmonic_extension: outer values must live on domain");
  require(boundary_values.empty() || boundary_values.size() == domain->boundary().size(), Errc::contract,
          "harmonic_extension: boundary values must align with domain.boundary()");
  const auto& bnd = domain->boundary();
  auto value = [&](Site t) -> double {
    const auto i = domain->index_of(t);
    if (i >= 0) return outer.values[static_cast<std::size_t>(i)];
    if (boundary_values.empty()) return 0.0;
    const auto it = std::lower_bound(bnd.begin(), bnd.end(), t, [](Site a, Site b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
    if (it != bnd.end() && *it == t) return boundary_values[static_cast<std::size_t>(it - bnd.begin())];
    return 0.0;
  };
  const GreenOperator gs(sub);
  const Eigen::VectorXd inner = harmonic_extension(gs, value);
  Field out(domain, outer.values, outer.seed_tag);
  for (std::size_t i = 0; i < sub->size(); ++i)
    out.values[static_cast<std::size_t>(domain->index_of(sub->sites()[i]))] = inner[static_cast<Eigen::Index>(i)];
  return out;
}

/// Covariance of the discrete binding field phi^{D, sub} on the sites of sub:
/// phi is the harmonic extension of h^D restricted to D \ sub. Computed as
/// E A E^T with A = G^D on the outer ring of sub and E the extension operator.
inline Eigen::MatrixXd discrete_binding_covariance(const GreenOperator& gd, const GreenOperator& gsub) {
  const auto& dom = gd.domain();
  const auto& sub = gsub.domain();
  require(sub.is_subset_of(dom), Errc::domain, "binding covariance: sub is not contained in domain");
  // outer ring of sub that lies inside D (boundary points of D carry h = 0)
  std::vector<Site> ring;
  for (auto z : sub.boundary())
    if (dom.contains(z)) ring.push_back(z);
  const auto nr = static_cast<Eigen::Index>(ring.size());
  const auto ns = static_cast<Eigen::Index>(sub.size());
  if (nr == 0) return Eigen::MatrixXd::Zero(ns, ns);
  Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(ns, nr);  // (1/4) adjacency sub -> ring
  for (Eigen::Index r = 0; r < nr; ++r)
    for (auto o : kNeighborOffsets) {
      const auto i = sub.index_of(ring[static_cast<std::size_t>(r)] + o);
      if (i >= 0) coupling(i, r) += 0.25;
    }
  const Eigen::MatrixXd ext = gsub.solve(coupling);  // E: ns x nr
  Eigen::MatrixXd ring_cov(nr, nr);
  for (Eigen::Index r = 0; r < nr; ++r) {
    const Eigen::VectorXd col = gd.column(static_cast<std::size_t>(dom.index_of(ring[static_cast<std::size_t>(r)])));
    for (Eigen::Index q = 0; q < nr; ++q) ring_cov(q, r) = col[dom.index_of(ring[static_cast<std::size_t>(q)])];
  }
  Eigen::MatrixXd cov = ext * ring_cov * ext.transpose();
  return 0.5 * (cov + cov.transpose());
}

// ---------------------------------------------------------------------------
// Continuum binding covariance
//
//   C^{D,D~}(x, y) = g int Pi^D(x,dz) log|y-z| - g int Pi^{D~}(x,dz) log|y-z|.

enum class QuadratureMethod {
  lattice,   ///< discrete harmonic measure of D_N at several N, Richardson-extrapolated
  analytic,  ///< closed-form Poisson kernel / image series
};

struct BindingCovarianceOptions {
  QuadratureMethod method = QuadratureMethod::lattice;
  std::vector<int> resolutions{64, 128, 256};
};

/// Polynomial extrapolation to h = 0 of samples f(h_i), h_i = 1/N_i (Neville).
inline double richardson(std::span<const int> resolutions, std::span<const double> values) {
  require(resolutions.size() == values.size() && !values.empty(), Errc::contract, "richardson: size mismatch");
  std::vector<double> p(values.begin(), values.end());
  const std::size_t n = p.size();
  for (std::size_t level = 1; level < n; ++level) {
    for (std::size_t i = 0; i + level < n; ++i) {
      const double hi = 1.0 / resolutions[i], hj = 1.0 / resolutions[i + level];
      p[i] = (hi * p[i + 1] - hj * p[i]) / (hi - hj);
    }
  }
  return p[0];
}

inline bool domain_contains_domain(const ContinuumDomain& outer, const ContinuumDomain& inner) {
  using K = ContinuumDomain::Kind;
  auto part_in_part = [](const ContinuumDomain& big, const ContinuumDomain& small) {
    constexpr double eps = 1e-12;
    if (big.is_rectangular()) {
      const auto B = big.rect();
      const auto s = small.bbox();
      return s.x0 >= B.x0 - eps && s.x1 <= B.x1 + eps && s.y0 >= B.y0 - eps && s.y1 <= B.y1 + eps;
    }
    const auto& c = big.params();
    if (small.kind() == K::disc) {
      const auto& d = small.params();
      return std::hypot(d[0] - c[0], d[1] - c[1]) + d[2] <= c[2] + eps;
    }
    const auto r = small.rect();
    for (Point p : {Point{r.x0, r.y0}, Point{r.x1, r.y0}, Point{r.x0, r.y1}, Point{r.x1, r.y1}})
      if (std::hypot(p.x - c[0], p.y - c[1]) > c[2] + eps) return false;
    return true;
  };
  for (const auto& s : inner.components()) {
    bool ok = false;
    for (const auto& b : outer.components()) ok = ok || part_in_part(b, s);
    if (!ok) return false;
  }
  return true;
}

namespace detail {

inline Site floor_site(Point x, int resolution) {
  return {static_cast<int>(std::floor(x.x * resolution + 1e-9)), static_cast<int>(std::floor(x.y * resolution + 1e-9))};
}

/// Lattice quadrature of int Pi^D(x,dz) log|y-z| for one x against many y.
class LatticeLogIntegrator {
 public:
  LatticeLogIntegrator(const ContinuumDomain& domain, std::vector<int> resolutions)
      : resolutions_(std::move(resolutions)) {
    for (int n : resolutions_) greens_.emplace_back(std::make_shared<const LatticeDomain>(discretize(domain, n)));
  }

  std::vector<double> integrate(Point x, std::span<const Point> ys) const {
    std::vector<std::vector<double>> per_level(ys.size(), std::vector<double>(resolutions_.size()));
    for (std::size_t l = 0; l < resolutions_.size(); ++l) {
      const int n = resolutions_[l];
      // bilinear blend over the enclosing lattice cell keeps the error smooth in 1/N
      const Site s = floor_site(x, n);
      const double fx = std::clamp(x.x * n - s.x, 0.0, 1.0), fy = std::clamp(x.y * n - s.y, 0.0, 1.0);
      std::vector<double> acc(ys.size(), 0.0);
      for (int c = 0; c < 4; ++c) {
        const int dx = c & 1, dy = c >> 1;
        const double wc = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
        if (wc < 1e-12) continue;
        const Site sc{s.x + dx, s.y + dy};
        require(greens_[l].domain().contains(sc), Errc::domain,
                "lattice quadrature: point too close to the boundary at resolution " + std::to_string(n));
        const auto hm = harmonic_measure(greens_[l], sc);
        for (std::size_t k = 0; k < ys.size(); ++k) {
          double a = 0.0;
          for (std::size_t b = 0; b < hm.points.size(); ++b) {
            const double zx = static_cast<double>(hm.points[b].x) / n, zy = static_cast<double>(hm.points[b].y) / n;
            a += hm.weights[b] * std::log(std::hypot(ys[k].x - zx, ys[k].y - zy));
          }
          acc[k] += wc * a;
        }
      }
      for (std::size_t k = 0; k < ys.size(); ++k) {
        per_level[k][l] = acc[k];
      }
    }
    std::vector<double> out(ys.size());
    for (std::size_t k = 0; k < ys.size(); ++k) out[k] = richardson(resolutions_, per_level[k]);
    return out;
  }

 private:
  std::vector<int> resolutions_;
  std::vector<GreenOperator> greens_;
};

}  // namespace detail

/// int Pi^D(x, dz) log|y - z| by the selected quadrature.
inline std::vector<double> harmonic_log_integrals(const ContinuumDomain& domain, Point x, std::span<const Point> ys,
                                                  const BindingCovarianceOptions& opts = {}) {
  require(domain.contains(x), Errc::domain, "harmonic_log_integrals: x is not in the domain");
  if (opts.method == QuadratureMethod::analytic) {
    std::vector<double> out;
    for (auto y : ys) out.push_back(harmonic_log_integral(domain, x, y));
    return out;
  }
  return detail::LatticeLogIntegrator(domain, opts.resolutions).integrate(x, ys);
}

/// Matrix C^{D, Dt}(points_i, points_j), symmetrized.
inline Eigen::MatrixXd binding_covariance(const ContinuumDomain& domain, const ContinuumDomain& sub,
                                          std::span<const Point> points, const BindingCovarianceOptions& opts = {}) {
  require(domain_contains_domain(domain, sub), Errc::domain, "binding_covariance: Dt is not contained in D");
  for (auto p : points) require(sub.contains(p), Errc::domain, "binding_covariance: point outside Dt");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd c(n, n);
  if (opts.method == QuadratureMethod::analytic) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const Point x = points[static_cast<std::size_t>(i)], y = points[static_cast<std::size_t>(j)];
        c(i, j) = kG * (harmonic_log_integral(domain, x, y) - harmonic_log_integral(sub, x, y));
      }
  } else {
    const detail::LatticeLogIntegrator outer(domain, opts.resolutions), inner(sub, opts.resolutions);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto a = outer.integrate(points[static_cast<std::size_t>(i)], points);
      const auto b = inner.integrate(points[static_cast<std::size_t>(i)], points);
      for (Eigen::Index j = 0; j < n; ++j) c(i, j) = kG * (a[static_cast<std::size_t>(j)] - b[static_cast<std::size_t>(j)]);
    }
  }
  return 0.5 * (c + c.transpose());
}

}  // namespace dgff
