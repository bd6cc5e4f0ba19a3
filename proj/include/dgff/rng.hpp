#pragma once

// Counter-based random numbers (Philox4x32-10) with independent streams.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

#include <json.hpp>

namespace dgff {

/// Seed plus replica stream; identical specs reproduce identical draws.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  /// Deterministic, well-mixed sub-spec for a nested component (level, child, ...).
  RngSpec child(std::uint64_t tag) const;

  friend bool operator==(const RngSpec&, const RngSpec&) = default;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline RngSpec RngSpec::child(std::uint64_t tag) const {
  return {splitmix64(seed ^ splitmix64(tag ^ 0x5DEECE66Dull)), stream};
}

inline nlohmann::json to_json(const RngSpec& r) { return {{"seed", r.seed}, {"stream", r.stream}}; }

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxBlock philox4x32_10(PhiloxBlock ctr, PhiloxKey key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
  }
  return ctr;
}

/// Sequential view of the Philox stream for one RngSpec. Block i of stream s
/// is philox(counter = (i, s), key = seed); the engine is cheap to copy.
class Philox {
 public:
  explicit Philox(RngSpec spec) : spec_(spec) {}

  PhiloxBlock next_block() {
    const PhiloxBlock ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(spec_.stream), static_cast<std::uint32_t>(spec_.stream >> 32)};
    const PhiloxKey key{static_cast<std::uint32_t>(spec_.seed), static_cast<std::uint32_t>(spec_.seed >> 32)};
    ++block_;
    return philox4x32_10(ctr, key);
  }

  /// Two uniforms in (0, 1) from one block, 53 bits each.
  std::array<double, 2> uniform_pair() {
    const auto b = next_block();
    return {to_unit(b[0], b[1]), to_unit(b[2], b[3])};
  }

  double uniform() {
    if (have_cached_uniform_) {
      have_cached_uniform_ = false;
      return cached_uniform_;
    }
    const auto u = uniform_pair();
    cached_uniform_ = u[1];
    have_cached_uniform_ = true;
    return u[0];
  }

  /// Standard normal via Box-Muller; both variates of a pair are used.
  double normal() {
    if (have_cached_normal_) {
      have_cached_normal_ = false;
      return cached_normal_;
    }
    const auto u = uniform_pair();
    const double r = std::sqrt(-2.0 * std::log(u[0]));
    const double t = 2.0 * std::numbers::pi * u[1];
    cached_normal_ = r * std::sin(t);
    have_cached_normal_ = true;
    return r * std::cos(t);
  }

  void fill_normal(std::span<double> out) {
    for (auto& v : out) v = normal();
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  static double to_unit(std::uint32_t lo, std::uint32_t hi) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  RngSpec spec_;
  std::uint64_t block_ = 0;
  double cached_normal_ = 0.0;
  bool have_cached_normal_ = false;
  double cached_uniform_ = 0.0;
  bool have_cached_uniform_ = false;
};

}  // namespace dgff
