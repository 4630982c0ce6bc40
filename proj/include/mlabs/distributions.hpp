#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/special_functions/erf.hpp>

namespace mlabs {

using Rng = std::mt19937_64;

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail P(Z > x), accurate far into the tail.
inline double normal_survival(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

inline double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(variance) + d * d / variance);
}

/// Gamma(shape, rate) log density.
inline double log_gamma_pdf(double x, double shape, double rate) {
  if (x <= 0.0) return -INFINITY;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

/// Inverse-gamma(shape, scale) log density.
inline double log_inv_gamma_pdf(double x, double shape, double scale) {
  if (x <= 0.0) return -INFINITY;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

inline double log_poisson_pmf(int k, double mean) {
  return k * std::log(mean) - mean - std::lgamma(k + 1.0);
}

inline double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double draw_uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double draw_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double draw_gamma(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline double draw_inv_gamma(Rng& rng, double shape, double scale) {
  return 1.0 / draw_gamma(rng, shape, scale);
}

/// Standard normal truncated to [lower, inf).
///
/// Inverse survival function while the tail mass is representable; beyond
/// that the exponential-proposal rejection sampler of Robert (1995), which is
/// exact and efficient for large lower bounds.
inline double draw_std_normal_lower_truncated(Rng& rng, double lower) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (lower < 8.0) {
    const double tail = normal_survival(lower);
    for (;;) {
      const double u = unif(rng);
      if (u == 0.0) continue;
      const double w = -normal_quantile(u * tail);
      if (w >= lower) return w;
    }
  }
  const double alpha = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double w = lower - std::log1p(-unif(rng)) / alpha;
    const double d = w - alpha;
    if (unif(rng) <= std::exp(-0.5 * d * d)) return w;
  }
}

/// N(mean, 1) truncated to (0, inf) when positive, else to (-inf, 0).
/// The result is strictly nonzero with the requested sign.
inline double draw_signed_truncated_normal(Rng& rng, double mean, bool positive) {
  for (;;) {
    if (positive) {
      const double z = mean + draw_std_normal_lower_truncated(rng, -mean);
      if (z > 0.0) return z;
    } else {
      const double z = mean - draw_std_normal_lower_truncated(rng, mean);
      if (z < 0.0) return z;
    }
  }
}

}  // namespace mlabs
