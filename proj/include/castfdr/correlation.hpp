#pragma once

#include <Eigen/Dense>
#include <map>
#include <span>
#include <vector>

#include "castfdr/core.hpp"

namespace cast {

// Mean row correlations this close to -1 (before clamping) trigger the
// harmonic fallback in the correlation-adjusted procedures.
inline constexpr double kFallbackTolerance = 1e-12;
// Default distance kept between a clamped value and the singular point -1.
inline constexpr double kDefaultClampDelta = 1e-9;

// Pairwise Pearson correlations of one group's features, in a fixed feature
// order. Unit diagonal; rows of zero-variance features get zero off-diagonals
// and are reported in `degenerate`.
struct GroupCorrelation {
  GroupId group;
  std::vector<FeatureId> order;
  Eigen::MatrixXd matrix;
  std::vector<FeatureId> degenerate;

  // Validates shape, symmetry, unit diagonal and |r| <= 1.
  static GroupCorrelation from_matrix(GroupId group, std::vector<FeatureId> order,
                                      Eigen::MatrixXd matrix);
};

// Row means of a group's correlation matrix with the diagonal included, so a
// fully uncorrelated group of size M_g has mean correlations 1 / M_g.
struct MeanRowCorrelations {
  GroupId group;
  std::vector<FeatureId> order;
  std::vector<double> values;
};

using CorrelationSet = std::map<GroupId, GroupCorrelation>;
using MeanCorrelationSet = std::map<GroupId, MeanRowCorrelations>;

// Sample Pearson correlations from raw values (one row per feature, one
// column per subject). Requires at least two subjects.
GroupCorrelation pearson_group_correlation(GroupId group, std::vector<FeatureId> order,
                                           const Eigen::MatrixXd& values);

MeanRowCorrelations mean_row_correlation(const GroupCorrelation& correlation);

// Restricts values to [-1 + delta, 1]; delta must lie in (0, 0.01].
MeanRowCorrelations clamp_mean_correlations(MeanRowCorrelations means,
                                            double delta = kDefaultClampDelta);

MeanCorrelationSet mean_rows_of(const CorrelationSet& correlations);

}  // namespace cast
