#pragma once

// Continuum domains, their lattice approximations, and dyadic squares.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgff/error.hpp"

namespace dgff {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Site {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Site&, const Site&) = default;
  Site operator+(Site o) const { return {x + o.x, y + o.y}; }
  Site operator-(Site o) const { return {x - o.x, y - o.y}; }
};

inline constexpr Site kNeighborOffsets[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

struct BoundingBox {
  double x0, y0, x1, y1;
};

/// Bounded open planar set: rectangle (square as special case), disc, or a
/// finite union of pairwise disjoint such sets.
class ContinuumDomain {
 public:
  enum class Kind { square, rectangle, disc, union_of };

  static ContinuumDomain square(double x0, double y0, double side) {
    require(side > 0.0, Errc::precondition, "square side must be positive");
    ContinuumDomain d;
    d.kind_ = Kind::square;
    d.params_ = {x0, y0, side};
    return d;
  }

  static ContinuumDomain rectangle(double x0, double y0, double x1, double y1) {
    require(x1 > x0 && y1 > y0, Errc::precondition, "rectangle must have positive extent");
    ContinuumDomain d;
    d.kind_ = Kind::rectangle;
    d.params_ = {x0, y0, x1, y1};
    return d;
  }

  static ContinuumDomain disc(double cx, double cy, double radius) {
    require(radius > 0.0, Errc::precondition, "disc radius must be positive");
    ContinuumDomain d;
    d.kind_ = Kind::disc;
    d.params_ = {cx, cy, radius};
    return d;
  }

  static ContinuumDomain unit_square() { return square(0.0, 0.0, 1.0); }

  static ContinuumDomain union_of(std::vector<ContinuumDomain> parts);

  Kind kind() const { return kind_; }
  const std::vector<double>& params() const { return params_; }
  bool is_union() const { return kind_ == Kind::union_of; }
  bool is_rectangular() const { return kind_ == Kind::square || kind_ == Kind::rectangle; }

  /// Connected pieces; a non-union domain is its own single component.
  std::vector<ContinuumDomain> components() const {
    if (is_union()) return parts_;
    return {*this};
  }

  /// Rectangle corners (x0, y0, x1, y1); only for square/rectangle kinds.
  BoundingBox rect() const {
    if (kind_ == Kind::square) return {params_[0], params_[1], params_[0] + params_[2], params_[1] + params_[2]};
    if (kind_ == Kind::rectangle) return {params_[0], params_[1], params_[2], params_[3]};
    fail(Errc::unsupported_domain, "rect() requires a rectangular domain");
  }

  BoundingBox bbox() const {
    switch (kind_) {
      case Kind::square:
      case Kind::rectangle: return rect();
      case Kind::disc: return {params_[0] - params_[2], params_[1] - params_[2], params_[0] + params_[2], params_[1] + params_[2]};
      case Kind::union_of: {
        BoundingBox b = parts_.front().bbox();
        for (const auto& p : parts_) {
          const auto q = p.bbox();
          b = {std::min(b.x0, q.x0), std::min(b.y0, q.y0), std::max(b.x1, q.x1), std::max(b.y1, q.y1)};
        }
        return b;
      }
    }
    return {};
  }

  /// l-infinity distance from p to the complement; 0 when p is not in the (open) set.
  double dist_inf_to_complement(Point p) const {
    switch (kind_) {
      case Kind::square:
      case Kind::rectangle: {
        const auto r = rect();
        const double d = std::min({p.x - r.x0, r.x1 - p.x, p.y - r.y0, r.y1 - p.y});
        return std::max(d, 0.0);
      }
      case Kind::disc: {
        const double ax = std::abs(p.x - params_[0]);
        const double ay = std::abs(p.y - params_[1]);
        const double rad = params_[2];
        const double r2 = ax * ax + ay * ay;
        if (r2 >= rad * rad) return 0.0;
        // largest s with the square corner (ax+s, ay+s) on the circle
        const double sum = ax + ay;
        return 0.5 * (-sum + std::sqrt(sum * sum - 2.0 * (r2 - rad * rad)));
      }
      case Kind::union_of: {
        // an l-infinity ball is connected, so it fits in the union iff it fits in one part
        double d = 0.0;
        for (const auto& part : parts_) d = std::max(d, part.dist_inf_to_complement(p));
        return d;
      }
    }
    return 0.0;
  }

  bool contains(Point p) const {
    switch (kind_) {
      case Kind::square:
      case Kind::rectangle: {
        const auto r = rect();
        return p.x > r.x0 && p.x < r.x1 && p.y > r.y0 && p.y < r.y1;
      }
      case Kind::disc: {
        const double dx = p.x - params_[0], dy = p.y - params_[1];
        return dx * dx + dy * dy < params_[2] * params_[2];
      }
      case Kind::union_of:
        return std::any_of(parts_.begin(), parts_.end(), [&](const auto& c) { return c.contains(p); });
    }
    return false;
  }

  /// Index into components() of the part containing p, or -1.
  int component_index(Point p) const {
    if (!is_union()) return contains(p) ? 0 : -1;
    for (std::size_t i = 0; i < parts_.size(); ++i)
      if (parts_[i].contains(p)) return static_cast<int>(i);
    return -1;
  }

  double area() const {
    switch (kind_) {
      case Kind::square:
      case Kind::rectangle: {
        const auto r = rect();
        return (r.x1 - r.x0) * (r.y1 - r.y0);
      }
      case Kind::disc: return std::numbers::pi * params_[2] * params_[2];
      case Kind::union_of: {
        double a = 0.0;
        for (const auto& p : parts_) a += p.area();
        return a;
      }
    }
    return 0.0;
  }

  /// Image under z -> scale * z + shift.
  ContinuumDomain transformed(double scale, Point shift) const {
    require(scale > 0.0, Errc::precondition, "scale must be positive");
    switch (kind_) {
      case Kind::square: return square(scale * params_[0] + shift.x, scale * params_[1] + shift.y, scale * params_[2]);
      case Kind::rectangle:
        return rectangle(scale * params_[0] + shift.x, scale * params_[1] + shift.y, scale * params_[2] + shift.x,
                         scale * params_[3] + shift.y);
      case Kind::disc: return disc(scale * params_[0] + shift.x, scale * params_[1] + shift.y, scale * params_[2]);
      case Kind::union_of: {
        std::vector<ContinuumDomain> parts;
        for (const auto& p : parts_) parts.push_back(p.transformed(scale, shift));
        return union_of(std::move(parts));
      }
    }
    return *this;
  }

  friend bool operator==(const ContinuumDomain&, const ContinuumDomain&) = default;

 private:
  Kind kind_ = Kind::square;
  std::vector<double> params_;
  std::vector<ContinuumDomain> parts_;
};

namespace detail {

inline bool rects_overlap(const BoundingBox& a, const BoundingBox& b) {
  return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

inline bool parts_overlap(const ContinuumDomain& a, const ContinuumDomain& b) {
  using K = ContinuumDomain::Kind;
  if (a.is_rectangular() && b.is_rectangular()) return rects_overlap(a.rect(), b.rect());
  if (a.kind() == K::disc && b.kind() == K::disc) {
    const auto& p = a.params();
    const auto& q = b.params();
    return std::hypot(p[0] - q[0], p[1] - q[1]) < p[2] + q[2];
  }
  const auto& disc = a.kind() == K::disc ? a : b;
  const auto& rect = a.kind() == K::disc ? b : a;
  const auto r = rect.rect();
  const auto& c = disc.params();
  const double nx = std::clamp(c[0], r.x0, r.x1);
  const double ny = std::clamp(c[1], r.y0, r.y1);
  return std::hypot(c[0] - nx, c[1] - ny) < c[2];
}

}  // namespace detail

inline ContinuumDomain ContinuumDomain::union_of(std::vector<ContinuumDomain> parts) {
  require(!parts.empty(), Errc::precondition, "union needs at least one component");
  std::vector<ContinuumDomain> flat;
  for (auto& p : parts) {
    if (p.is_union()) {
      for (auto& q : p.parts_) flat.push_back(q);
    } else {
      flat.push_back(std::move(p));
    }
  }
  for (std::size_t i = 0; i < flat.size(); ++i)
    for (std::size_t j = i + 1; j < flat.size(); ++j)
      require(!detail::parts_overlap(flat[i], flat[j]), Errc::domain, "union components must be pairwise disjoint");
  if (flat.size() == 1) return flat.front();
  ContinuumDomain d;
  d.kind_ = Kind::union_of;
  d.parts_ = std::move(flat);
  return d;
}

// ---------------------------------------------------------------------------
// JSON: {"kind": "square", "params": [x0, y0, side]}
//       {"kind": "rectangle", "params": [x0, y0, x1, y1]}
//       {"kind": "disc", "params": [cx, cy, r]}
//       {"kind": "union", "params": [], "components": [...]}

inline nlohmann::json to_json(const ContinuumDomain& d) {
  using K = ContinuumDomain::Kind;
  nlohmann::json j;
  switch (d.kind()) {
    case K::square: j["kind"] = "square"; break;
    case K::rectangle: j["kind"] = "rectangle"; break;
    case K::disc: j["kind"] = "disc"; break;
    case K::union_of: j["kind"] = "union"; break;
  }
  j["params"] = d.params();
  if (d.is_union()) {
    j["components"] = nlohmann::json::array();
    for (const auto& c : d.components()) j["components"].push_back(to_json(c));
  }
  return j;
}

inline ContinuumDomain domain_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) fail(Errc::parse, "domain JSON needs a \"kind\" field");
  const std::string kind = j.at("kind").get<std::string>();
  std::vector<double> p;
  if (j.contains("params")) p = j.at("params").get<std::vector<double>>();
  auto need = [&](std::size_t n) {
    if (p.size() != n) fail(Errc::parse, "domain kind '" + kind + "' expects " + std::to_string(n) + " params");
  };
  if (kind == "square") {
    need(3);
    return ContinuumDomain::square(p[0], p[1], p[2]);
  }
  if (kind == "rectangle") {
    need(4);
    return ContinuumDomain::rectangle(p[0], p[1], p[2], p[3]);
  }
  if (kind == "disc") {
    need(3);
    return ContinuumDomain::disc(p[0], p[1], p[2]);
  }
  if (kind == "union") {
    if (!j.contains("components")) fail(Errc::parse, "union needs \"components\"");
    std::vector<ContinuumDomain> parts;
    for (const auto& c : j.at("components")) parts.push_back(domain_from_json(c));
    return ContinuumDomain::union_of(std::move(parts));
  }
  fail(Errc::parse, "unknown domain kind '" + kind + "'");
}

// ---------------------------------------------------------------------------

/// Finite set of lattice sites with its outer boundary. Immutable; site order
/// is row-major (by y, then x), so a full box enumerates like a dense array.
class LatticeDomain {
 public:
  LatticeDomain(int resolution, std::vector<Site> sites, std::optional<ContinuumDomain> parent = std::nullopt)
      : n_(resolution), sites_(std::move(sites)), parent_(std::move(parent)) {
    require(!sites_.empty(), Errc::degenerate_discretization, "lattice domain has no sites");
    std::sort(sites_.begin(), sites_.end(), row_major_less);
    sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
    build_index();
  }

  /// Box {x0..x0+w-1} x {y0..y0+h-1}.
  static LatticeDomain box(int x0, int y0, int w, int h, int resolution = 1) {
    require(w >= 1 && h >= 1, Errc::degenerate_discretization, "box needs positive extent");
    std::vector<Site> s;
    s.reserve(static_cast<std::size_t>(w) * h);
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) s.push_back({x, y});
    return LatticeDomain(resolution, std::move(s));
  }

  int resolution() const { return n_; }
  std::size_t size() const { return sites_.size(); }
  const std::vector<Site>& sites() const { return sites_; }
  const std::vector<Site>& boundary() const { return boundary_; }
  const std::optional<ContinuumDomain>& parent() const { return parent_; }

  /// Index of s in sites(), or -1.
  std::ptrdiff_t index_of(Site s) const {
    if (s.x < gx0_ || s.y < gy0_ || s.x >= gx0_ + gw_ || s.y >= gy0_ + gh_) return -1;
    return grid_[static_cast<std::size_t>(s.y - gy0_) * gw_ + (s.x - gx0_)];
  }
  bool contains(Site s) const { return index_of(s) >= 0; }

  /// Extent of the sites when they fill their bounding rectangle.
  struct Box {
    int x0, y0, w, h;
  };
  std::optional<Box> as_box() const {
    const int w = bx1_ - bx0_ + 1, h = by1_ - by0_ + 1;
    if (static_cast<std::size_t>(w) * h != sites_.size()) return std::nullopt;
    return Box{bx0_, by0_, w, h};
  }
  bool is_box() const { return as_box().has_value(); }

  Point scaled(Site s) const { return {static_cast<double>(s.x) / n_, static_cast<double>(s.y) / n_}; }

  bool is_subset_of(const LatticeDomain& other) const {
    return std::all_of(sites_.begin(), sites_.end(), [&](Site s) { return other.contains(s); });
  }

  /// Sites of *this not in sub.
  std::vector<Site> minus(const LatticeDomain& sub) const {
    std::vector<Site> out;
    for (auto s : sites_)
      if (!sub.contains(s)) out.push_back(s);
    return out;
  }

 private:
  static bool row_major_less(Site a, Site b) { return a.y != b.y ? a.y < b.y : a.x < b.x; }

  void build_index() {
    bx0_ = by0_ = std::numeric_limits<int>::max();
    bx1_ = by1_ = std::numeric_limits<int>::min();
    for (auto s : sites_) {
      bx0_ = std::min(bx0_, s.x);
      by0_ = std::min(by0_, s.y);
      bx1_ = std::max(bx1_, s.x);
      by1_ = std::max(by1_, s.y);
    }
    gx0_ = bx0_ - 1;
    gy0_ = by0_ - 1;
    gw_ = bx1_ - bx0_ + 3;
    gh_ = by1_ - by0_ + 3;
    const std::size_t cells = static_cast<std::size_t>(gw_) * gh_;
    require(cells < (std::size_t{1} << 31), Errc::resource, "lattice domain bounding box too large");
    grid_.assign(cells, -1);
    for (std::size_t i = 0; i < sites_.size(); ++i)
      grid_[static_cast<std::size_t>(sites_[i].y - gy0_) * gw_ + (sites_[i].x - gx0_)] = static_cast<std::ptrdiff_t>(i);
    std::vector<char> mark(cells, 0);
    for (auto s : sites_) {
      for (auto o : kNeighborOffsets) {
        const Site t = s + o;
        const std::size_t k = static_cast<std::size_t>(t.y - gy0_) * gw_ + (t.x - gx0_);
        if (grid_[k] < 0 && !mark[k]) {
          mark[k] = 1;
          boundary_.push_back(t);
        }
      }
    }
    std::sort(boundary_.begin(), boundary_.end(), row_major_less);
  }

  int n_ = 1;
  std::vector<Site> sites_;
  std::vector<Site> boundary_;
  std::optional<ContinuumDomain> parent_;
  int bx0_ = 0, by0_ = 0, bx1_ = 0, by1_ = 0;
  int gx0_ = 0, gy0_ = 0, gw_ = 0, gh_ = 0;
  std::vector<std::ptrdiff_t> grid_;
};

using LatticeDomainPtr = std::shared_ptr<const LatticeDomain>;

/// Maximal lattice approximation D_N = {x : d_inf(x/N, D^c) > 1/N}.
inline LatticeDomain discretize(const ContinuumDomain& domain, int resolution) {
  require(resolution >= 1, Errc::precondition, "resolution must be positive");
  const auto b = domain.bbox();
  const int x0 = static_cast<int>(std::floor(b.x0 * resolution)) - 1;
  const int x1 = static_cast<int>(std::ceil(b.x1 * resolution)) + 1;
  const int y0 = static_cast<int>(std::floor(b.y0 * resolution)) - 1;
  const int y1 = static_cast<int>(std::ceil(b.y1 * resolution)) + 1;
  std::vector<Site> sites;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Point p{static_cast<double>(x) / resolution, static_cast<double>(y) / resolution};
      // strict inequality, with a margin so sites exactly at distance 1/N never slip in
      if (domain.dist_inf_to_complement(p) * resolution > 1.0 + 1e-12) sites.push_back({x, y});
    }
  }
  if (sites.empty())
    fail(Errc::degenerate_discretization,
         "degenerate discretization: no lattice point at resolution " + std::to_string(resolution));
  return LatticeDomain(resolution, std::move(sites), domain);
}

// ---------------------------------------------------------------------------

/// (k 2^-n, (k+1) 2^-n) x (l 2^-n, (l+1) 2^-n). Corners are exact in binary floating point.
struct DyadicSquare {
  std::int64_t k = 0;
  std::int64_t l = 0;
  int n = 0;

  double side() const { return std::ldexp(1.0, -n); }
  Point corner() const { return {std::ldexp(static_cast<double>(k), -n), std::ldexp(static_cast<double>(l), -n)}; }
  ContinuumDomain to_domain() const { return ContinuumDomain::square(corner().x, corner().y, side()); }
  friend auto operator<=>(const DyadicSquare&, const DyadicSquare&) = default;
};

/// The 4^m subsquares of side 2^-(n+m), row-major from the lower-left corner.
inline std::vector<DyadicSquare> dyadic_children(const DyadicSquare& s, int levels) {
  require(levels >= 1, Errc::precondition, "dyadic_children needs m >= 1");
  require(levels <= 15, Errc::resource, "dyadic_children: too many levels");
  const std::int64_t per_side = std::int64_t{1} << levels;
  std::vector<DyadicSquare> out;
  out.reserve(static_cast<std::size_t>(per_side * per_side));
  for (std::int64_t j = 0; j < per_side; ++j)
    for (std::int64_t i = 0; i < per_side; ++i) out.push_back({s.k * per_side + i, s.l * per_side + j, s.n + levels});
  return out;
}

/// Concentric square of side (1 - 2 delta) * side(s).
inline ContinuumDomain shrink(const DyadicSquare& s, double delta) {
  require(delta > 0.0 && delta < 0.5, Errc::precondition, "shrink needs 0 < delta < 1/2");
  const double side = s.side();
  const auto c = s.corner();
  return ContinuumDomain::square(c.x + delta * side, c.y + delta * side, (1.0 - 2.0 * delta) * side);
}

}  // namespace dgff
