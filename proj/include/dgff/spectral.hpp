#pragma once

// Sine-basis diagonalization of the killed-walk operator I - P on a w x h box.
//
// Eigenvectors  phi_k(x) = S_w(x1,k1) S_h(x2,k2),  S_n(j,k) = sqrt(2/(n+1)) sin(pi j k/(n+1)),
// eigenvalues   mu_k = 1 - (cos(pi k1/(w+1)) + cos(pi k2/(h+1))) / 2,
// so G = sum_k phi_k phi_k^T / mu_k. Transforms are FFTW RODFT00 (DST-I).

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <fftw3.h>

#include "dgff/error.hpp"

namespace dgff {

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace detail

/// Spectral toolkit for one box shape. Sites are indexed row-major,
/// index = (x2 - 1) * w + (x1 - 1) for box coordinates x in {1..w} x {1..h}.
/// Execution is thread-safe; each call uses its own buffers.
class BoxSpectral {
 public:
  BoxSpectral(int width, int height) : w_(width), h_(height) {
    require(w_ >= 1 && h_ >= 1, Errc::precondition, "BoxSpectral needs a non-empty box");
    const std::size_t n = size();
    std::vector<double> in(n), out(n);
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      plan_.reset(fftw_plan_r2r_2d(h_, w_, in.data(), out.data(), FFTW_RODFT00, FFTW_RODFT00,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED));
    }
    require(plan_ != nullptr, Errc::resource, "FFTW plan creation failed");
    inv_mu_.resize(n);
    inv_sqrt_mu_.resize(n);
    for (int k2 = 1; k2 <= h_; ++k2) {
      for (int k1 = 1; k1 <= w_; ++k1) {
        const double mu = eigenvalue(k1, k2);
        inv_mu_[index(k1, k2)] = 1.0 / mu;
        inv_sqrt_mu_[index(k1, k2)] = 1.0 / std::sqrt(mu);
      }
    }
    scale_ = 1.0 / std::sqrt(4.0 * (w_ + 1.0) * (h_ + 1.0));
  }

  int width() const { return w_; }
  int height() const { return h_; }
  std::size_t size() const { return static_cast<std::size_t>(w_) * h_; }

  double eigenvalue(int k1, int k2) const {
    return 1.0 - 0.5 * (std::cos(std::numbers::pi * k1 / (w_ + 1)) + std::cos(std::numbers::pi * k2 / (h_ + 1)));
  }

  /// G^{1/2} z for white noise z: a DGFF sample on the box.
  std::vector<double> sample(std::span<const double> white) const {
    require(white.size() == size(), Errc::contract, "BoxSpectral::sample: wrong noise length");
    std::vector<double> in(size()), out(size());
    for (std::size_t i = 0; i < size(); ++i) in[i] = white[i] * inv_sqrt_mu_[i];
    execute(in, out);
    for (auto& v : out) v *= scale_;
    return out;
  }

  /// G f = (I - P)^{-1} f.
  std::vector<double> apply_green(std::span<const double> f) const {
    require(f.size() == size(), Errc::contract, "BoxSpectral::apply_green: wrong length");
    std::vector<double> a(f.begin(), f.end()), b(size());
    execute(a, b);
    const double s2 = scale_ * scale_;
    for (std::size_t i = 0; i < size(); ++i) b[i] *= inv_mu_[i] * s2;
    execute(b, a);
    return a;
  }

  /// Harmonic extension into the box of boundary data: value(x1, x2) is queried
  /// on the outer ring (x1 in {0, w+1} or x2 in {0, h+1}).
  template <class BoundaryValue>
  std::vector<double> harmonic_extension(BoundaryValue&& value) const {
    std::vector<double> rhs(size(), 0.0);
    for (int x1 = 1; x1 <= w_; ++x1) {
      rhs[index(x1, 1)] += 0.25 * value(x1, 0);
      rhs[index(x1, h_)] += 0.25 * value(x1, h_ + 1);
    }
    for (int x2 = 1; x2 <= h_; ++x2) {
      rhs[index(1, x2)] += 0.25 * value(0, x2);
      rhs[index(w_, x2)] += 0.25 * value(w_ + 1, x2);
    }
    return apply_green(rhs);
  }

  /// G(x, x) for every site, by the separable sum A_w diag(1/mu) A_h^T.
  std::vector<double> green_diagonal() const {
    const auto sq_w = squared_modes(w_);
    const auto sq_h = squared_modes(h_);
    // t(k1, x2) = sum_k2 sq_h(x2, k2) / mu(k1, k2)
    std::vector<double> t(size(), 0.0);
    for (int x2 = 1; x2 <= h_; ++x2)
      for (int k2 = 1; k2 <= h_; ++k2) {
        const double s = sq_h[static_cast<std::size_t>(x2 - 1) * h_ + (k2 - 1)];
        for (int k1 = 1; k1 <= w_; ++k1) t[index(k1, x2)] += s * inv_mu_[index(k1, k2)];
      }
    std::vector<double> g(size(), 0.0);
    for (int x2 = 1; x2 <= h_; ++x2)
      for (int x1 = 1; x1 <= w_; ++x1) {
        double acc = 0.0;
        for (int k1 = 1; k1 <= w_; ++k1) acc += sq_w[static_cast<std::size_t>(x1 - 1) * w_ + (k1 - 1)] * t[index(k1, x2)];
        g[index(x1, x2)] = acc;
      }
    return g;
  }

  /// G(x, y) by direct mode sum, O(w h).
  double green_entry(int x1, int x2, int y1, int y2) const {
    double acc = 0.0;
    const double cw = 2.0 / (w_ + 1), ch = 2.0 / (h_ + 1);
    for (int k2 = 1; k2 <= h_; ++k2) {
      const double s2 = ch * std::sin(std::numbers::pi * k2 * x2 / (h_ + 1)) * std::sin(std::numbers::pi * k2 * y2 / (h_ + 1));
      for (int k1 = 1; k1 <= w_; ++k1) {
        const double s1 = cw * std::sin(std::numbers::pi * k1 * x1 / (w_ + 1)) * std::sin(std::numbers::pi * k1 * y1 / (w_ + 1));
        acc += s1 * s2 * inv_mu_[index(k1, k2)];
      }
    }
    return acc;
  }

  std::size_t index(int x1, int x2) const { return static_cast<std::size_t>(x2 - 1) * w_ + (x1 - 1); }

 private:
  void execute(std::vector<double>& in, std::vector<double>& out) const {
    fftw_execute_r2r(plan_.get(), in.data(), out.data());
  }

  static std::vector<double> squared_modes(int n) {
    std::vector<double> s(static_cast<std::size_t>(n) * n);
    for (int x = 1; x <= n; ++x)
      for (int k = 1; k <= n; ++k) {
        const double v = std::sin(std::numbers::pi * x * k / (n + 1));
        s[static_cast<std::size_t>(x - 1) * n + (k - 1)] = 2.0 / (n + 1) * v * v;
      }
    return s;
  }

  int w_, h_;
  std::unique_ptr<fftw_plan_s, detail::FftwPlanDeleter> plan_;
  std::vector<double> inv_mu_;
  std::vector<double> inv_sqrt_mu_;
  double scale_ = 1.0;
};

}  // namespace dgff
