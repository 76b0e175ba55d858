#pragma once

#include <span>

#include "castfdr/error.hpp"

namespace cast {

// Least-slope estimate of the null proportion from p-values sorted in
// ascending order. Always lies in (0, 1]; a single p-value gives exactly 1.
// Throws EmptyInput or UnsortedInput when the preconditions fail.
double estimate_pi0_lsl(std::span<const double> sorted_pvalues);

}  // namespace cast
