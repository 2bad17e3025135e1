#include "dsas/gaussian.hpp"

#include <cmath>
#include <numbers>

namespace dsas {

namespace {
constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double normal_interval_mass(double z1, double z2) {
  if (z1 >= 0.0) return 0.5 * (std::erfc(z1 * kInvSqrt2) - std::erfc(z2 * kInvSqrt2));
  if (z2 <= 0.0) return 0.5 * (std::erfc(-z2 * kInvSqrt2) - std::erfc(-z1 * kInvSqrt2));
  return 0.5 * (std::erf(z2 * kInvSqrt2) - std::erf(z1 * kInvSqrt2));
}

}  // namespace dsas
