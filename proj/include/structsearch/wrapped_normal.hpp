#pragma once

// Wrapped normal on the unit circle, one coordinate at a time.
//
// Small sigma: direct image sum over k = -K..K around the reduced offset.
// Large sigma: the equivalent Fourier series
//   p(d) = 1 + 2 sum_m exp(-2 pi^2 m^2 sigma^2) cos(2 pi m d),
// which needs only a few terms once sigma is ~0.5 or more.

#include "structsearch/core.hpp"

#include <cmath>
#include <numbers>
#include <optional>

namespace structsearch {

namespace detail {
inline constexpr double kFourierSwitch = 0.6;

inline void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ValidationError("wrapped normal: sigma must be positive and finite");
}

inline double reduce_offset(double d) { return d - std::round(d); }
}  // namespace detail

/// Image count that keeps the dropped tail below ~1e-12 for |d| <= 1/2.
inline int wrapped_normal_default_images(double sigma) {
  return static_cast<int>(std::ceil(6.0 * sigma)) + 1;
}

struct WrappedNormalEval {
  double log_density = 0.0;
  double score = 0.0;  // d/dx log density
};

/// Log density and its derivative at x for mean mu. Passing K forces the
/// direct image sum with that truncation.
inline WrappedNormalEval wrapped_normal_eval(double x, double mu, double sigma,
                                             std::optional<int> K = std::nullopt) {
  detail::check_sigma(sigma);
  if (K && *K < 1) throw ValidationError("wrapped normal: K must be >= 1");
  const double d = detail::reduce_offset(x - mu);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  if (!K && sigma >= detail::kFourierSwitch) {
    double p = 1.0, dp = 0.0;
    for (int m = 1;; ++m) {
      const double w = std::exp(-0.5 * two_pi * two_pi * m * m * sigma * sigma);
      if (w < 1e-18) break;
      p += 2.0 * w * std::cos(two_pi * m * d);
      dp -= 2.0 * two_pi * m * w * std::sin(two_pi * m * d);
    }
    return {std::log(p), dp / p};
  }

  const int kmax = K ? *K : wrapped_normal_default_images(sigma);
  const double inv_var = 1.0 / (sigma * sigma);
  // Largest exponent belongs to the image nearest d, which is k = 0 after reduction.
  double sum = 0.0, wsum = 0.0;
  const double e0 = -0.5 * d * d * inv_var;
  for (int k = -kmax; k <= kmax; ++k) {
    const double r = d - k;
    const double w = std::exp(-0.5 * r * r * inv_var - e0);
    sum += w;
    wsum += w * (-r * inv_var);
  }
  const double log_norm = -std::log(sigma) - 0.5 * std::log(two_pi);
  return {log_norm + e0 + std::log(sum), wsum / sum};
}

inline double wrapped_normal_log_density(double x, double mu, double sigma,
                                         std::optional<int> K = std::nullopt) {
  return wrapped_normal_eval(x, mu, sigma, K).log_density;
}

inline double wrapped_normal_score(double x, double mu, double sigma,
                                   std::optional<int> K = std::nullopt) {
  return wrapped_normal_eval(x, mu, sigma, K).score;
}

}  // namespace structsearch
