#pragma once

// Replica ensembles: a small worker pool and per-replica summaries of level-set
// and chaos runs. Replica i always draws from stream i, and results are stored
// by index, so the outcome does not depend on the number of threads.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dgff/chaos.hpp"
#include "dgff/levelset.hpp"
#include "dgff/sampler.hpp"
#include "dgff/stats.hpp"

namespace dgff {

/// Worker count: DGFF_THREADS if set to a positive integer, else the hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("DGFF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls f(i) for i in [0, n) on up to `threads` workers. The exception of the
/// lowest failing index is rethrown.
template <class F>
void parallel_for(std::size_t n, F&& f, unsigned threads = thread_count()) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned k = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (k <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < k; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Stream of replica i under a base seed.
inline RngSpec replica_rng(std::uint64_t seed, std::size_t replica) { return {seed, static_cast<std::uint64_t>(replica)}; }

// ---------------------------------------------------------------------------
// Level sets

/// What to keep from each level-set replica.
struct LevelsetPlan {
  ContinuumDomain domain = ContinuumDomain::unit_square();
  double lambda = 0.3;
  int n = 128;
  int r = 3;                                  // profile radius
  std::vector<double> thresholds{0.0};        // b values whose counts are recorded
  double overshoot_cap = -1.0;                // keep overshoots in [0, cap]; negative keeps none
  bool cluster = false;                       // accumulate profiles in [0, log log N]
  std::vector<BoundingBox> cells;             // per-cell normalized counts at b = 0
  std::map<int, double> custom_a;             // explicit a_N per N; empty means the canonical schedule
};

inline CenteringSchedule schedule_of(const LevelsetPlan& plan) {
  return plan.custom_a.empty() ? CenteringSchedule::canonical(plan.lambda) : CenteringSchedule::custom(plan.lambda, plan.custom_a);
}

struct LevelsetSummary {
  std::vector<double> counts;                 // |Gamma_N(b)| per threshold
  std::vector<double> overshoots;
  std::optional<ClusterAccumulator> cluster;
  std::vector<double> cell_mass;
  double weight = 0.0;                        // 1 / K_N
};

inline double extraction_threshold(const LevelsetPlan& plan) {
  double t = 0.0;
  for (double b : plan.thresholds) t = std::min(t, b);
  return t;
}

inline LevelsetSummary summarize(const PointMeasure& pm, const LevelsetPlan& plan) {
  LevelsetSummary s;
  s.weight = pm.weight;
  s.counts.assign(plan.thresholds.size(), 0.0);
  for (const auto& a : pm.atoms)
    for (std::size_t k = 0; k < plan.thresholds.size(); ++k) s.counts[k] += a.overshoot >= plan.thresholds[k] ? 1.0 : 0.0;
  if (plan.overshoot_cap >= 0.0)
    for (const auto& a : pm.atoms)
      if (a.overshoot >= 0.0 && a.overshoot <= plan.overshoot_cap) s.overshoots.push_back(a.overshoot);
  if (plan.cluster) {
    s.cluster.emplace(std::min(plan.r, 3), pm.n);
    s.cluster->add(pm);
  }
  if (!plan.cells.empty()) {
    s.cell_mass.assign(plan.cells.size(), 0.0);
    for (const auto& a : pm.atoms) {
      if (a.overshoot < 0.0) continue;
      for (std::size_t k = 0; k < plan.cells.size(); ++k) {
        const auto& c = plan.cells[k];
        if (a.position.x >= c.x0 && a.position.x < c.x1 && a.position.y >= c.y0 && a.position.y < c.y1) {
          s.cell_mass[k] += pm.weight;
          break;
        }
      }
    }
  }
  return s;
}

/// Samples h on D_N for replica i and builds its point measure.
class LevelsetEnsemble {
 public:
  explicit LevelsetEnsemble(LevelsetPlan plan)
      : plan_(std::move(plan)),
        schedule_(schedule_of(plan_)),
        sampler_(std::make_shared<const LatticeDomain>(discretize(plan_.domain, plan_.n))) {
    require(plan_.n >= 8, Errc::precondition, "level-set experiments need N >= 8");
  }

  const LevelsetPlan& plan() const { return plan_; }
  const DgffSampler& sampler() const { return sampler_; }

  /// Tag N keeps different resolutions of one replica independent.
  RngSpec rng(std::uint64_t seed, std::size_t replica) const {
    return replica_rng(seed, replica).child(static_cast<std::uint64_t>(plan_.n));
  }

  PointMeasure point_measure(std::uint64_t seed, std::size_t replica) const {
    return dgff::point_measure(sampler_.sample(rng(seed, replica)), schedule_, plan_.r, extraction_threshold(plan_));
  }

  LevelsetSummary summary(std::uint64_t seed, std::size_t replica) const {
    return summarize(point_measure(seed, replica), plan_);
  }

  std::vector<LevelsetSummary> run(std::uint64_t seed, std::size_t replicas) const {
    std::vector<LevelsetSummary> out(replicas);
    parallel_for(replicas, [&](std::size_t i) { out[i] = summary(seed, i); });
    return out;
  }

 private:
  LevelsetPlan plan_;
  CenteringSchedule schedule_;
  DgffSampler sampler_;
};

/// Column k of the per-replica counts.
inline std::vector<double> counts_at(const std::vector<LevelsetSummary>& s, std::size_t k) {
  std::vector<double> out;
  for (const auto& x : s) out.push_back(x.counts.at(k));
  return out;
}

inline std::vector<double> pooled_overshoots(const std::vector<LevelsetSummary>& s) {
  std::vector<double> out;
  for (const auto& x : s) out.insert(out.end(), x.overshoots.begin(), x.overshoots.end());
  return out;
}

inline ClusterAccumulator merged_cluster(const std::vector<LevelsetSummary>& s, int r, int n) {
  ClusterAccumulator acc(r, n);
  for (const auto& x : s)
    if (x.cluster) acc.merge(*x.cluster);
  return acc;
}

inline IntensityAccumulator merged_intensity(const std::vector<LevelsetSummary>& s, std::vector<BoundingBox> cells) {
  IntensityAccumulator acc(std::move(cells));
  for (const auto& x : s) acc.add_counts(x.cell_mass);
  return acc;
}

/// Least-squares slope of log(mean count) against log N.
inline double log_log_slope(const std::vector<int>& ns, const std::vector<double>& means) {
  require(ns.size() == means.size() && ns.size() >= 2, Errc::insufficient_data, "slope needs at least two resolutions");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    require(means[i] > 0.0, Errc::insufficient_data, "empty level sets at N = " + std::to_string(ns[i]));
    const double x = std::log(static_cast<double>(ns[i])), y = std::log(means[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// Chaos

/// The dyadic square equal to `domain`, or an unsupported_domain error.
inline DyadicSquare as_dyadic_square(const ContinuumDomain& domain) {
  require(domain.kind() == ContinuumDomain::Kind::square, Errc::unsupported_domain, "chaos runs need a dyadic square domain");
  const auto b = domain.bbox();
  const double side = b.x1 - b.x0;
  const int n = static_cast<int>(std::lround(-std::log2(side)));
  require(std::ldexp(1.0, -n) == side, Errc::unsupported_domain, "square side is not a power of two");
  const double k = std::ldexp(b.x0, n), l = std::ldexp(b.y0, n);
  require(k == std::floor(k) && l == std::floor(l), Errc::unsupported_domain, "square corner is not on the dyadic grid");
  return {static_cast<std::int64_t>(k), static_cast<std::int64_t>(l), n};
}

/// Chaos replica i draws from stream i under tag 0 (level-set runs use tags N >= 8).
inline RngSpec chaos_rng(std::uint64_t seed, std::size_t replica) { return replica_rng(seed, replica).child(0); }

/// Y_0(S), ..., Y_m(S) for every replica.
inline std::vector<std::vector<double>> chaos_total_masses(const DyadicHierarchy& h, std::uint64_t seed, std::size_t replicas) {
  std::vector<std::vector<double>> out(replicas);
  parallel_for(replicas, [&](std::size_t i) { out[i] = h.total_masses(chaos_rng(seed, i)); });
  return out;
}

}  // namespace dgff
