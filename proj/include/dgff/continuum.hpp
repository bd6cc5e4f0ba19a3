#pragma once

// Closed-form continuum harmonic-measure integrals
//
//   I^D(x, y) = int Pi^D(x, dz) log|y - z|,
//
// from the Poisson kernel of the disc and the method-of-images (theta-series)
// Green function of the rectangle. For unions the harmonic measure from x
// lives on the boundary of x's component. I^D(x, x) is the log conformal radius.

#include <cmath>
#include <complex>
#include <numbers>

#include "dgff/constants.hpp"
#include "dgff/domain.hpp"

namespace dgff {

namespace detail {

// log|sin(u + iv)|, stable for large |v|.
inline double log_abs_sin(double u, double v) {
  const double av = std::abs(v);
  const double e = std::exp(-2.0 * av);
  const double s = std::sin(u);
  return av - std::numbers::ln2 + 0.5 * std::log(4.0 * s * s * e + (1.0 - e) * (1.0 - e));
}

// I for the rectangle (0,a) x (0,b) with a <= b; x, y inside.
inline double rectangle_log_integral(std::complex<double> x, std::complex<double> y, double a, double b) {
  using C = std::complex<double>;
  const double k = std::numbers::pi / (2.0 * a);
  const int terms = static_cast<int>(std::ceil(40.0 / (std::numbers::pi * b / a))) + 1;
  auto ell = [&](C zeta, int n) {
    const C q = (zeta - C(0.0, 2.0 * b * n)) * k;
    return log_abs_sin(q.real(), q.imag());
  };
  const C d = y - x;
  // n = 0 term of the direct family, regularized against log|x - y|
  const C q0 = d * k;
  double regular = std::log(k);
  if (std::abs(q0) > 1e-8) regular += std::log(std::abs(std::sin(q0) / q0));
  double rest = 0.0;
  for (int n = -terms; n <= terms; ++n) {
    if (n != 0) rest += ell(d, n);
    rest += ell(y + x, n) - ell(y - std::conj(x), n) - ell(y + std::conj(x), n);
  }
  return -regular - rest;
}

}  // namespace detail

/// int Pi^D(x, dz) log|y - z| for x in D (any y in the closure of x's component, or outside it).
inline double harmonic_log_integral(const ContinuumDomain& domain, Point x, Point y) {
  using C = std::complex<double>;
  const int ci = domain.component_index(x);
  require(ci >= 0, Errc::domain, "harmonic_log_integral: x is not in the domain");
  const ContinuumDomain comp = domain.is_union() ? domain.components()[static_cast<std::size_t>(ci)] : domain;
  const double direct = std::log(std::hypot(x.x - y.x, x.y - y.y));
  if (!(comp.contains(y) || (x == y))) return direct;
  if (comp.kind() == ContinuumDomain::Kind::disc) {
    const auto& p = comp.params();
    const C xt(x.x - p[0], x.y - p[1]), yt(y.x - p[0], y.y - p[1]);
    return std::log(std::abs(p[2] * p[2] - xt * std::conj(yt)) / p[2]);
  }
  const auto r = comp.rect();
  double a = r.x1 - r.x0, b = r.y1 - r.y0;
  C xc(x.x - r.x0, x.y - r.y0), yc(y.x - r.x0, y.y - r.y0);
  if (a > b) {  // transpose so the series runs along the longer side
    std::swap(a, b);
    xc = C(xc.imag(), xc.real());
    yc = C(yc.imag(), yc.real());
  }
  return detail::rectangle_log_integral(xc, yc, a, b);
}

/// log of the conformal radius of x's component, seen from x.
inline double log_conformal_radius(const ContinuumDomain& domain, Point x) { return harmonic_log_integral(domain, x, x); }

/// Continuum Green function normalized like the lattice one, g (I^D(x,y) - log|x-y|); x != y.
inline double continuum_green(const ContinuumDomain& domain, Point x, Point y) {
  if (domain.component_index(x) != domain.component_index(y)) return 0.0;
  return kG * (harmonic_log_integral(domain, x, y) - std::log(std::hypot(x.x - y.x, x.y - y.y)));
}

}  // namespace dgff
