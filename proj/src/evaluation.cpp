#include "castfdr/evaluation.hpp"

#include <cmath>
#include <string>

namespace cast {

double fdp(std::size_t false_rejections, std::size_t rejections) {
  if (false_rejections > rejections) {
    throw Error(ErrorKind::CountInconsistency,
                "false rejections (" + std::to_string(false_rejections) +
                    ") exceed rejections (" + std::to_string(rejections) + ")");
  }
  return static_cast<double>(false_rejections) /
         static_cast<double>(std::max<std::size_t>(rejections, 1));
}

double tpp(std::size_t true_rejections, std::size_t nonnull_count) {
  if (true_rejections > nonnull_count) {
    throw Error(ErrorKind::CountInconsistency,
                "true rejections (" + std::to_string(true_rejections) +
                    ") exceed the non-null count (" + std::to_string(nonnull_count) + ")");
  }
  return static_cast<double>(true_rejections) /
         static_cast<double>(std::max<std::size_t>(nonnull_count, 1));
}

MeanSd aggregate(std::span<const double> values) {
  if (values.size() < 2) {
    throw Error(ErrorKind::TooFewReplicates,
                "aggregation needs at least two values, got " + std::to_string(values.size()));
  }
  MeanSd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double squares = 0.0;
  for (double v : values) squares += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(squares / static_cast<double>(values.size() - 1));
  return out;
}

MethodSummary summarize_method(Method method, std::span<const double> rejections,
                               std::span<const double> fdps, std::span<const double> tpps) {
  if (rejections.size() != fdps.size() || fdps.size() != tpps.size()) {
    throw Error(ErrorKind::CountInconsistency,
                "per-replicate metric vectors must have equal length");
  }
  MethodSummary summary;
  summary.method = method;
  summary.replicates = rejections.size();
  summary.rejections = aggregate(rejections);
  summary.fdr = aggregate(fdps);
  summary.tpr = aggregate(tpps);
  return summary;
}

}  // namespace cast
