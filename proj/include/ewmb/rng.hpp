#pragma once

#include <cmath>
#include <cstdint>

// Counter-based deterministic random streams. Every variate is a pure
// function of (seed, stream, counter), so parallel consumers can draw any
// subset of a stream in any order and still reproduce the same values
// bit-for-bit. Appending streams never perturbs existing ones.

namespace ewmb::rng {

// SplitMix64 finalizer; bijective on 64-bit words with full avalanche.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t word(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t counter) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = mix64(h ^ mix64(stream ^ 0xbb67ae8584caa73bULL));
  h = mix64(h ^ mix64(counter ^ 0x3c6ef372fe94f82bULL));
  return h;
}

// Derives an independent child seed (per Monte Carlo iteration, per rule, ...).
inline constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
  return word(seed, 0xa54ff53a5f1d36f1ULL, index);
}

// Uniform on the open interval (0,1); never returns an exact endpoint.
inline double u01(std::uint64_t seed, std::uint64_t stream,
                  std::uint64_t counter) {
  return (static_cast<double>(word(seed, stream, counter) >> 11) + 0.5) *
         0x1.0p-53;
}

// Inverse of the standard normal CDF. Acklam's rational approximation
// refined with one Halley step; absolute error near machine precision.
inline double normal_icdf(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x * M_SQRT1_2) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

// Standard normal variate keyed by (seed, stream, counter).
inline double normal(std::uint64_t seed, std::uint64_t stream,
                     std::uint64_t counter) {
  return normal_icdf(u01(seed, stream, counter));
}

}  // namespace ewmb::rng
