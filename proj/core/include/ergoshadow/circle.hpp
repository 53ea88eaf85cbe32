#pragma once

#include <cmath>
#include <numbers>

namespace ergoshadow {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Canonical representative in [0, 1).
inline double wrap01(double t) {
  double r = t - std::floor(t);
  if (r >= 1.0) r = 0.0;
  return r;
}

// Signed difference b - a folded into [-1/2, 1/2).
inline double circle_diff(double a, double b) {
  double d = b - a;
  d -= std::floor(d + 0.5);
  return d;
}

inline double circle_dist(double a, double b) { return std::abs(circle_diff(a, b)); }

}  // namespace ergoshadow
