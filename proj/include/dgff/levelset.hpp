#pragma once

// Intermediate level sets, the normalization K_N and the point measure
// (position, overshoot, local profile) built on them.

#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dgff/constants.hpp"
#include "dgff/field.hpp"

namespace dgff {

/// Centering sequence a_N. Canonical: a_N = 2 sqrt(g) lambda log N.
class CenteringSchedule {
 public:
  static CenteringSchedule canonical(double lambda) {
    require(lambda > 0.0 && lambda < 1.0, Errc::precondition, "lambda must lie in (0, 1)");
    CenteringSchedule s;
    s.lambda_ = lambda;
    return s;
  }
  /// Explicit a_N per resolution; resolutions absent from the map are an error.
  static CenteringSchedule custom(double lambda, std::map<int, double> values) {
    auto s = canonical(lambda);
    s.custom_ = std::move(values);
    s.is_custom_ = true;
    return s;
  }

  double lambda() const { return lambda_; }
  bool is_canonical() const { return !is_custom_; }

  double a(int n) const {
    require(n >= 2, Errc::precondition, "centering needs N >= 2");
    if (!is_custom_) return kTwoSqrtG * lambda_ * std::log(static_cast<double>(n));
    const auto it = custom_.find(n);
    require(it != custom_.end(), Errc::precondition, "custom schedule has no a_N for N = " + std::to_string(n));
    return it->second;
  }

 private:
  double lambda_ = 0.5;
  bool is_custom_ = false;
  std::map<int, double> custom_;
};

/// K_N = N^2 exp(-a_N^2 / (2 g log N)) / sqrt(log N).
inline double k_norm(int n, const CenteringSchedule& schedule) {
  require(n >= 2, Errc::precondition, "k_norm needs N >= 2");
  const double ln = std::log(static_cast<double>(n));
  const double a = schedule.a(n);
  return static_cast<double>(n) * n * std::exp(-a * a / (2.0 * kG * ln)) / std::sqrt(ln);
}

struct LevelSet {
  std::vector<Site> sites;
  double threshold = 0.0;  // b
  int n = 0;
};

/// {x in D_N : h(x) >= a_N + b}, in the field's site order.
inline LevelSet extract(const Field& field, const CenteringSchedule& schedule, double b) {
  LevelSet out{{}, b, field.resolution()};
  const double level = schedule.a(field.resolution()) + b;
  const auto& sites = field.domain->sites();
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (field.values[i] >= level) out.sites.push_back(sites[i]);
  return out;
}

/// Number of sites at or above a_N + b, without materializing the set.
inline std::size_t level_set_size(const Field& field, const CenteringSchedule& schedule, double b) {
  const double level = schedule.a(field.resolution()) + b;
  std::size_t c = 0;
  for (double v : field.values) c += v >= level ? 1 : 0;
  return c;
}

struct Atom {
  Point position;                // x / N
  double overshoot = 0.0;        // h(x) - a_N
  std::vector<double> profile;   // h(x) - h(x + z), z in Lambda_r row-major (dz2 outer, dz1 inner)
};

/// Atoms of the level set at threshold b, each with weight 1 / K_N.
struct PointMeasure {
  std::vector<Atom> atoms;
  double weight = 0.0;
  int n = 0;
  double lambda = 0.0;
  int r = 0;
  double threshold = 0.0;

  std::size_t profile_size() const { return static_cast<std::size_t>(2 * r + 1) * (2 * r + 1); }
  static std::size_t profile_index(int r, int dz1, int dz2) {
    return static_cast<std::size_t>(dz2 + r) * (2 * r + 1) + static_cast<std::size_t>(dz1 + r);
  }
  double total_mass() const { return weight * static_cast<double>(atoms.size()); }
};

/// One atom per site with h >= a_N + b; profiles read 0 outside D_N.
inline PointMeasure point_measure(const Field& field, const CenteringSchedule& schedule, int r = 3,
                                  double threshold = 0.0) {
  require(r >= 0, Errc::precondition, "profile radius must be non-negative");
  const int n = field.resolution();
  PointMeasure pm{{}, 1.0 / k_norm(n, schedule), n, schedule.lambda(), r, threshold};
  const double a = schedule.a(n);
  const auto& dom = *field.domain;
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const double h = field.values[i];
    if (h < a + threshold) continue;
    const Site x = dom.sites()[i];
    Atom atom{dom.scaled(x), h - a, std::vector<double>(pm.profile_size())};
    for (int dz2 = -r; dz2 <= r; ++dz2)
      for (int dz1 = -r; dz1 <= r; ++dz1)
        atom.profile[PointMeasure::profile_index(r, dz1, dz2)] = h - field.at(x + Site{dz1, dz2});
    pm.atoms.push_back(std::move(atom));
  }
  return pm;
}

/// (1/K_N) sum over atoms of f(position, overshoot).
inline double measure_integrate(const PointMeasure& pm, const std::function<double(Point, double)>& f) {
  double acc = 0.0;
  for (const auto& a : pm.atoms) acc += f(a.position, a.overshoot);
  return pm.weight * acc;
}

inline void write_csv(std::ostream& os, const PointMeasure& pm) {
  os << "N,lambda,x1,x2,overshoot";
  for (int dz2 = -pm.r; dz2 <= pm.r; ++dz2)
    for (int dz1 = -pm.r; dz1 <= pm.r; ++dz1) os << ",p_" << dz1 << "_" << dz2;
  os << '\n';
  os.precision(17);
  for (const auto& a : pm.atoms) {
    os << pm.n << ',' << pm.lambda << ',' << a.position.x << ',' << a.position.y << ',' << a.overshoot;
    for (double v : a.profile) os << ',' << v;
    os << '\n';
  }
}

/// Reads what write_csv produced. The weight is recomputed from the canonical schedule.
inline PointMeasure read_point_measure_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), Errc::parse, "point-measure CSV is empty");
  std::size_t cols = 1;
  for (char c : line) cols += c == ',' ? 1 : 0;
  require(line.rfind("N,lambda,x1,x2,overshoot", 0) == 0 && cols >= 6, Errc::parse, "point-measure CSV header mismatch");
  const std::size_t psize = cols - 5;
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(psize))));
  require(side * side == static_cast<int>(psize) && side % 2 == 1, Errc::parse, "profile columns are not a square window");
  PointMeasure pm;
  pm.r = (side - 1) / 2;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(Errc::parse, "point-measure CSV: bad number '" + cell + "'");
      }
    }
    require(v.size() == cols, Errc::parse, "point-measure CSV: wrong column count");
    pm.n = static_cast<int>(v[0]);
    pm.lambda = v[1];
    pm.atoms.push_back({{v[2], v[3]}, v[4], std::vector<double>(v.begin() + 5, v.end())});
  }
  if (pm.n >= 2 && pm.lambda > 0.0 && pm.lambda < 1.0)
    pm.weight = 1.0 / k_norm(pm.n, CenteringSchedule::canonical(pm.lambda));
  return pm;
}

}  // namespace dgff
