#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace spen {

inline constexpr double kZ95 = 1.96;

// Sample mean with a normal-approximation 95% confidence interval.
struct ExpectationEstimate {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::infinity();
  double ci95_low = -std::numeric_limits<double>::infinity();
  double ci95_high = std::numeric_limits<double>::infinity();
  std::size_t count = 0;

  double half_width() const { return kZ95 * std_error; }
};

// Values are summed in the order given, so equal inputs give bit-identical
// estimates.
inline ExpectationEstimate estimate_mean(const std::vector<double>& xs) {
  ExpectationEstimate e;
  e.count = xs.size();
  if (xs.empty()) return e;
  double sum = 0.0;
  for (double x : xs) sum += x;
  e.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return e;  // interval stays unbounded
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  const double var = ss / static_cast<double>(xs.size() - 1);
  e.std_error = std::sqrt(var / static_cast<double>(xs.size()));
  e.ci95_low = e.mean - kZ95 * e.std_error;
  e.ci95_high = e.mean + kZ95 * e.std_error;
  return e;
}

}  // namespace spen
