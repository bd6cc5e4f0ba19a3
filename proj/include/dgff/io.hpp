#pragma once

// CSV and PGM artifacts: fields (x1,x2,value), chaos measures (x1,x2,mass),
// 16-bit P5 heatmaps with a JSON sidecar, and a renderer from any of these CSVs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgff/chaos.hpp"
#include "dgff/field.hpp"
#include "dgff/levelset.hpp"

namespace dgff {

namespace detail {

inline void set_csv_precision(std::ostream& os) { os.precision(17); }

/// Splits a CSV line of numbers; throws a parse error naming the line.
inline std::vector<double> parse_numbers(const std::string& line, std::size_t line_no, std::size_t expected) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size())
      fail(Errc::parse, "line " + std::to_string(line_no) + ": bad number '" + cell + "'");
    out.push_back(v);
  }
  if (expected != 0 && out.size() != expected)
    fail(Errc::parse, "line " + std::to_string(line_no) + ": expected " + std::to_string(expected) + " columns, found " +
                          std::to_string(out.size()));
  return out;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV

inline void write_csv(std::ostream& os, const Field& f) {
  detail::set_csv_precision(os);
  os << "x1,x2,value\n";
  const auto& sites = f.domain->sites();
  for (std::size_t i = 0; i < sites.size(); ++i) os << sites[i].x << ',' << sites[i].y << ',' << f.values[i] << '\n';
}

/// Field on the sites listed in the file; resolution is not stored in the CSV.
inline Field read_field_csv(std::istream& is, int resolution = 1) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && detail::strip_cr(line) == "x1,x2,value", Errc::parse,
          "line 1: field CSV header must be 'x1,x2,value'");
  std::vector<std::pair<Site, double>> rows;
  std::size_t no = 1;
  while (std::getline(is, line)) {
    ++no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto v = detail::parse_numbers(line, no, 3);
    rows.push_back({{static_cast<int>(v[0]), static_cast<int>(v[1])}, v[2]});
  }
  require(!rows.empty(), Errc::parse, "field CSV has no rows");
  std::vector<Site> sites;
  for (const auto& r : rows) sites.push_back(r.first);
  auto dom = std::make_shared<const LatticeDomain>(resolution, sites);
  require(dom->size() == rows.size(), Errc::parse, "field CSV lists a site twice");
  std::vector<double> values(rows.size());
  for (const auto& r : rows) values[static_cast<std::size_t>(dom->index_of(r.first))] = r.second;
  return Field(dom, std::move(values));
}

inline void write_csv(std::ostream& os, const ChaosMeasure& m) {
  detail::set_csv_precision(os);
  os << "x1,x2,mass\n";
  for (std::size_t i = 0; i < m.pixels.size(); ++i) os << m.pixels[i].x << ',' << m.pixels[i].y << ',' << m.pixel_mass[i] << '\n';
}

struct MeasureRow {
  Point x;
  double mass;
};

inline std::vector<MeasureRow> read_measure_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && detail::strip_cr(line) == "x1,x2,mass", Errc::parse,
          "line 1: measure CSV header must be 'x1,x2,mass'");
  std::vector<MeasureRow> rows;
  std::size_t no = 1;
  while (std::getline(is, line)) {
    ++no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto v = detail::parse_numbers(line, no, 3);
    rows.push_back({{v[0], v[1]}, v[2]});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// PGM

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;  // row-major, row 0 at the top
};

/// Binary P5 with maxval 65535 (two bytes per pixel, most significant first).
inline void write_pgm(std::ostream& os, const GrayImage& img) {
  require(img.width > 0 && img.height > 0 && img.pixels.size() == static_cast<std::size_t>(img.width) * img.height,
          Errc::contract, "image size does not match its pixels");
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  for (auto p : img.pixels) {
    const char b[2] = {static_cast<char>(p >> 8), static_cast<char>(p & 0xff)};
    os.write(b, 2);
  }
}

inline GrayImage read_pgm(std::istream& is) {
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  require(is && magic == "P5" && w > 0 && h > 0 && maxval == 65535, Errc::parse, "not a 16-bit P5 image");
  is.get();  // single whitespace before the raster
  GrayImage img{w, h, std::vector<std::uint16_t>(static_cast<std::size_t>(w) * h)};
  for (auto& p : img.pixels) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    require(static_cast<bool>(is), Errc::parse, "PGM raster is truncated");
    p = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  return img;
}

/// Linear value map used for a rendered image.
struct RenderScale {
  double min = 0.0;
  double max = 0.0;
  double x0 = 0.0, y0 = 0.0, dx = 1.0, dy = 1.0;  // data coordinates of pixel (col 0, bottom row) and spacing
  std::string mode;                                // "grid" or "scatter"
};

inline nlohmann::json to_json(const RenderScale& s) {
  return {{"min", s.min}, {"max", s.max}, {"x0", s.x0}, {"y0", s.y0}, {"dx", s.dx}, {"dy", s.dy}, {"mode", s.mode}};
}

namespace detail {

inline std::uint16_t map_gray(double v, double lo, double hi) {
  if (!(hi > lo)) return 32768;
  const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(t * 65535.0));
}

// Index of v on a regular grid starting at x0 with spacing dx.
inline int grid_index(double v, double x0, double dx) { return static_cast<int>(std::lround((v - x0) / dx)); }

// Smallest positive gap between sorted distinct values, or 1.
inline double min_gap(const std::set<double>& values) {
  double gap = std::numeric_limits<double>::infinity();
  for (auto it = values.begin(); std::next(it) != values.end() && it != values.end(); ++it) gap = std::min(gap, *std::next(it) - *it);
  return std::isfinite(gap) && gap > 0 ? gap : 1.0;
}

}  // namespace detail

/// Values at (x, y) on a regular grid: one image pixel per grid point, empty
/// grid points at the minimum value, top row = largest y.
inline std::pair<GrayImage, RenderScale> render_grid(const std::vector<std::pair<Point, double>>& points) {
  require(!points.empty(), Errc::parse, "nothing to render");
  std::set<double> xs, ys;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [p, v] : points) {
    xs.insert(p.x);
    ys.insert(p.y);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  RenderScale s{lo, hi, *xs.begin(), *ys.begin(), detail::min_gap(xs), detail::min_gap(ys), "grid"};
  const int w = detail::grid_index(*xs.rbegin(), s.x0, s.dx) + 1;
  const int h = detail::grid_index(*ys.rbegin(), s.y0, s.dy) + 1;
  require(static_cast<double>(w) * h <= 1e8, Errc::resource, "rendered image would be too large");
  GrayImage img{w, h, std::vector<std::uint16_t>(static_cast<std::size_t>(w) * h, detail::map_gray(lo, lo, hi))};
  for (const auto& [p, v] : points) {
    const int c = detail::grid_index(p.x, s.x0, s.dx), r = h - 1 - detail::grid_index(p.y, s.y0, s.dy);
    img.pixels[static_cast<std::size_t>(r) * w + c] = detail::map_gray(v, lo, hi);
  }
  return {img, s};
}

/// Level-set atoms on an N x N canvas over [0,1]^2: brightness grows with overshoot.
inline std::pair<GrayImage, RenderScale> render_scatter(const PointMeasure& pm) {
  const int n = std::max(pm.n, 1);
  GrayImage img{n, n, std::vector<std::uint16_t>(static_cast<std::size_t>(n) * n, 0)};
  double hi = 0.0;
  for (const auto& a : pm.atoms) hi = std::max(hi, a.overshoot);
  RenderScale s{0.0, hi, 0.0, 0.0, 1.0 / n, 1.0 / n, "scatter"};
  for (const auto& a : pm.atoms) {
    const int c = std::clamp(static_cast<int>(std::floor(a.position.x * n)), 0, n - 1);
    const int r = n - 1 - std::clamp(static_cast<int>(std::floor(a.position.y * n)), 0, n - 1);
    // every atom is visible; the top quarter of the range encodes the overshoot
    const double t = hi > 0 ? a.overshoot / hi : 1.0;
    img.pixels[static_cast<std::size_t>(r) * n + c] = static_cast<std::uint16_t>(std::lround(49152.0 + 16383.0 * t));
  }
  return {img, s};
}

/// Renders a field, measure or point-measure CSV, chosen by its header.
inline std::pair<GrayImage, RenderScale> render_csv(std::istream& is) {
  std::string header;
  require(static_cast<bool>(std::getline(is, header)), Errc::parse, "line 1: empty CSV");
  header = detail::strip_cr(header);
  std::stringstream rest;
  rest << header << '\n' << is.rdbuf();
  if (header.rfind("N,lambda,x1,x2,overshoot", 0) == 0) return render_scatter(read_point_measure_csv(rest));
  std::vector<std::pair<Point, double>> pts;
  if (header == "x1,x2,value") {
    const auto f = read_field_csv(rest);
    for (std::size_t i = 0; i < f.size(); ++i)
      pts.push_back({{double(f.domain->sites()[i].x), double(f.domain->sites()[i].y)}, f.values[i]});
  } else if (header == "x1,x2,mass") {
    for (const auto& r : read_measure_csv(rest)) pts.push_back({r.x, r.mass});
  } else {
    fail(Errc::parse, "line 1: unrecognized CSV header '" + header + "'");
  }
  return render_grid(pts);
}

/// Writes out_pgm and out_pgm + ".json" (the value mapping).
inline RenderScale render_heatmap(const std::string& in_csv, const std::string& out_pgm) {
  std::ifstream in(in_csv);
  require(static_cast<bool>(in), Errc::parse, "cannot open " + in_csv);
  const auto [img, scale] = render_csv(in);
  std::ofstream out(out_pgm, std::ios::binary);
  require(static_cast<bool>(out), Errc::resource, "cannot write " + out_pgm);
  write_pgm(out, img);
  std::ofstream side(out_pgm + ".json");
  side << to_json(scale).dump(2) << '\n';
  return scale;
}

}  // namespace dgff
