#pragma once

#include <numbers>

namespace dgff {

/// Green-function growth constant: G^{V_N}(x,x) = g log N + O(1) deep inside V_N.
inline constexpr double kG = 2.0 / std::numbers::pi;

/// alpha = 2/sqrt(g) = sqrt(2 pi); also the critical chaos parameter.
inline constexpr double kAlpha = 2.5066282746310002;

/// 2 sqrt(g), the leading coefficient of max h / log N.
inline constexpr double kTwoSqrtG = 2.0 * 0.79788456080286536;

}  // namespace dgff
