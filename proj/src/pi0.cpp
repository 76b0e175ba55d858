#include "castfdr/pi0.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cast {

// Slopes l_i = (m + 1 - i) / (1 - P_(i)) decrease while the p-value spacing
// grows faster than the remaining count shrinks; the first increase marks the
// flattening of the empirical cdf that the null portion produces.
double estimate_pi0_lsl(std::span<const double> sorted_pvalues) {
  const std::size_t m = sorted_pvalues.size();
  if (m == 0) {
    throw Error(ErrorKind::EmptyInput, "pi0 estimate needs at least one p-value");
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double p = sorted_pvalues[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorKind::PValueOutOfRange,
                  "p-value " + std::to_string(p) + " outside [0, 1]");
    }
    if (i > 0 && p < sorted_pvalues[i - 1]) {
      throw Error(ErrorKind::UnsortedInput, "p-values must be sorted ascending");
    }
  }
  if (m == 1) return 1.0;

  const double inf = std::numeric_limits<double>::infinity();
  auto slope = [&](std::size_t i) {  // i is 1-based
    const double p = sorted_pvalues[i - 1];
    if (p >= 1.0) return inf;
    return (static_cast<double>(m) + 1.0 - static_cast<double>(i)) / (1.0 - p);
  };

  double previous = slope(1);
  double chosen = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 2; i <= m; ++i) {
    const double current = slope(i);
    if (current > previous) {
      chosen = current;
      break;
    }
    previous = current;
  }
  if (std::isnan(chosen)) chosen = slope(m);  // slopes never rose; use the last

  const double m0 = std::min(std::floor(chosen) + 1.0, static_cast<double>(m));
  return m0 / static_cast<double>(m);
}

}  // namespace cast
