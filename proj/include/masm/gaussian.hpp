#pragma once

#include <cmath>
#include <numbers>

namespace masm::gauss {

inline double pdf(double x) {
  if (!std::isfinite(x)) return 0.0;
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Upper tail, 1 - cdf(x), without cancellation.
inline double sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// P(a < g < b) for standard normal g. Either bound may be infinite.
inline double mass(double a, double b) {
  if (b <= a) return 0.0;
  if (a > 0.0) return sf(a) - sf(b);
  return cdf(b) - cdf(a);
}

// E[g ; a < g < b] = pdf(a) - pdf(b).
inline double first_moment(double a, double b) {
  if (b <= a) return 0.0;
  return pdf(a) - pdf(b);
}

// E[g^2 ; a < g < b] = mass + a pdf(a) - b pdf(b).
inline double second_moment(double a, double b) {
  if (b <= a) return 0.0;
  const double ta = std::isfinite(a) ? a * pdf(a) : 0.0;
  const double tb = std::isfinite(b) ? b * pdf(b) : 0.0;
  return mass(a, b) + ta - tb;
}

}  // namespace masm::gauss
