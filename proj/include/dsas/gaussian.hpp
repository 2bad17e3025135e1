#pragma once

namespace dsas {

// Standard normal density.
double normal_pdf(double z);

// Standard normal CDF via the complementary error function.
double normal_cdf(double z);

// Probability mass of the standard normal on [z1, z2], computed with erf or
// erfc depending on the side so that tail intervals keep full precision and
// mass(-b, -a) == mass(a, b) bit-for-bit.
double normal_interval_mass(double z1, double z2);

}  // namespace dsas
