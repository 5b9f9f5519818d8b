#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace carbcal {

// One engine per chain. Every draw in the library goes through the helpers
// below so that a seed fully determines a run.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline double normal(Rng& rng, double mean, double sd) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

// Shape/rate parameterisation throughout.
inline double gamma_rate(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline double beta(Rng& rng, double a, double b) {
  const double x = gamma_rate(rng, a, 1.0);
  const double y = gamma_rate(rng, b, 1.0);
  return x / (x + y);
}

inline double exponential(Rng& rng) {
  return std::exponential_distribution<double>(1.0)(rng);
}

namespace dist {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(var) - kLogSqrt2Pi;
}

inline double normal_pdf(double x, double mean, double var) {
  return std::exp(normal_logpdf(x, mean, var));
}

inline double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// Student-t with `dof` degrees of freedom, location and scale.
inline double t_logpdf(double x, double dof, double loc, double scale) {
  const double z = (x - loc) / scale;
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi) - std::log(scale) -
         0.5 * (dof + 1.0) * std::log1p(z * z / dof);
}

// Gamma(shape, rate) log density.
inline double gamma_logpdf(double x, double shape, double rate) {
  if (x <= 0.0) return -INFINITY;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace dist
}  // namespace carbcal
