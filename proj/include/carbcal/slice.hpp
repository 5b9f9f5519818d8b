#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>

#include "carbcal/random.hpp"

namespace carbcal {

struct SliceConfig {
  double width = 1.0;
  int max_steps = 20;  // stepping-out expansions allowed per side
  std::optional<std::pair<double, double>> bounds;
};

// Filled in when a caller wants to audit a single update.
struct SliceTrace {
  double level = 0.0;  // log slice height z
  double left = 0.0;   // stepped-out interval before shrinkage
  double right = 0.0;
  int steps_left = 0;
  int steps_right = 0;
  int shrinks = 0;
};

// Univariate slice sampling with stepping-out and shrinkage.
//
// The step budget is split at random between the two sides
// (J = floor(m U), K = m - 1 - J with m = max_steps + 1) which keeps the
// update reversible while never exceeding max_steps per side. The interval
// is truncated to `bounds`; non-finite log densities count as outside the
// slice.
template <class LogDensity>
double slice_sample(LogDensity&& log_density, double current, const SliceConfig& cfg, Rng& rng,
                    SliceTrace* trace = nullptr) {
  if (!(cfg.width > 0.0)) throw std::invalid_argument("slice width must be positive");
  if (cfg.max_steps < 1) throw std::invalid_argument("slice max_steps must be >= 1");
  const double lower = cfg.bounds ? cfg.bounds->first : -std::numeric_limits<double>::infinity();
  const double upper = cfg.bounds ? cfg.bounds->second : std::numeric_limits<double>::infinity();
  if (cfg.bounds && !(lower < upper)) throw std::invalid_argument("slice bounds must satisfy lo < hi");
  if (current < lower || current > upper)
    throw std::invalid_argument("slice sampler started outside its bounds");

  const double f0 = log_density(current);
  if (!std::isfinite(f0))
    throw std::invalid_argument("slice sampler started at a point with zero density");

  auto in_slice = [&](double x, double level) {
    if (x < lower || x > upper) return false;
    const double f = log_density(x);
    return std::isfinite(f) && f > level;
  };

  const double level = f0 - exponential(rng);

  double left = current - cfg.width * uniform01(rng);
  double right = left + cfg.width;

  const int m = cfg.max_steps + 1;
  int j = static_cast<int>(std::floor(m * uniform01(rng)));
  if (j > m - 1) j = m - 1;
  int k = (m - 1) - j;
  int steps_left = 0;
  int steps_right = 0;
  while (j > 0 && left > lower && in_slice(left, level)) {
    left -= cfg.width;
    --j;
    ++steps_left;
  }
  while (k > 0 && right < upper && in_slice(right, level)) {
    right += cfg.width;
    --k;
    ++steps_right;
  }
  if (left < lower) left = lower;
  if (right > upper) right = upper;

  if (trace) {
    trace->level = level;
    trace->left = left;
    trace->right = right;
    trace->steps_left = steps_left;
    trace->steps_right = steps_right;
    trace->shrinks = 0;
  }

  while (true) {
    const double x = uniform(rng, left, right);
    if (in_slice(x, level)) return x;
    if (trace) ++trace->shrinks;
    if (x < current)
      left = x;
    else
      right = x;
    // Interval collapsed onto the current point through round-off.
    if (right - left <= 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(current) + 1.0))
      return current;
  }
}

}  // namespace carbcal
