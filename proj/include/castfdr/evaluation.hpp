#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "castfdr/core.hpp"

namespace cast {

// False discovery proportion V / max(R, 1); an all-null replicate with no
// rejections scores 0, not 0/0.
double fdp(std::size_t false_rejections, std::size_t rejections);

// True positive proportion TP / max(M1, 1).
double tpp(std::size_t true_rejections, std::size_t nonnull_count);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, n - 1 in the denominator
};

// Needs at least two values so the spread is defined.
MeanSd aggregate(std::span<const double> values);

// One method's averages over the replicates of a single scenario.
struct MethodSummary {
  Method method = Method::BH;
  std::size_t replicates = 0;
  MeanSd rejections;
  MeanSd fdr;
  MeanSd tpr;
};

MethodSummary summarize_method(Method method, std::span<const double> rejections,
                               std::span<const double> fdps, std::span<const double> tpps);

}  // namespace cast
