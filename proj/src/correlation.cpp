#include "castfdr/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cast {

namespace {

void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace

GroupCorrelation GroupCorrelation::from_matrix(GroupId group, std::vector<FeatureId> order,
                                               Eigen::MatrixXd matrix) {
  const auto n = static_cast<Eigen::Index>(order.size());
  require(n > 0, ErrorKind::EmptyInput, "correlation matrix for group '" + group + "' is empty");
  require(matrix.rows() == n && matrix.cols() == n, ErrorKind::InvalidArgument,
          "correlation matrix for group '" + group + "' does not match its feature count");
  for (Eigen::Index i = 0; i < n; ++i) {
    require(matrix(i, i) == 1.0, ErrorKind::InvalidArgument,
            "correlation matrix for group '" + group + "' lacks a unit diagonal");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = matrix(i, j);
      require(std::abs(r - matrix(j, i)) <= 1e-12, ErrorKind::InvalidArgument,
              "correlation matrix for group '" + group + "' is not symmetric");
      require(std::abs(r) <= 1.0 && !std::isnan(r), ErrorKind::InvalidArgument,
              "correlation outside [-1, 1] in group '" + group + "'");
    }
  }
  return {std::move(group), std::move(order), std::move(matrix), {}};
}

GroupCorrelation pearson_group_correlation(GroupId group, std::vector<FeatureId> order,
                                           const Eigen::MatrixXd& values) {
  const auto n = static_cast<Eigen::Index>(order.size());
  require(n > 0, ErrorKind::EmptyInput, "no features given for group '" + group + "'");
  require(values.rows() == n, ErrorKind::InvalidArgument,
          "value rows do not match the feature order for group '" + group + "'");
  require(values.cols() >= 2, ErrorKind::InvalidArgument,
          "correlations need at least two subjects");

  const Eigen::MatrixXd centered = values.colwise() - values.rowwise().mean();
  const Eigen::VectorXd norms = centered.rowwise().norm();

  GroupCorrelation result;
  result.group = std::move(group);
  result.order = std::move(order);
  result.matrix = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms(i) == 0.0) result.degenerate.push_back(result.order[i]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms(i) == 0.0) continue;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (norms(j) == 0.0) continue;
      double r = centered.row(i).dot(centered.row(j)) / (norms(i) * norms(j));
      r = std::clamp(r, -1.0, 1.0);  // rounding can nudge perfect fits past 1
      result.matrix(i, j) = r;
      result.matrix(j, i) = r;
    }
  }
  return result;
}

MeanRowCorrelations mean_row_correlation(const GroupCorrelation& correlation) {
  MeanRowCorrelations means;
  means.group = correlation.group;
  means.order = correlation.order;
  const auto n = correlation.matrix.rows();
  means.values.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    means.values[static_cast<std::size_t>(i)] =
        correlation.matrix.row(i).sum() / static_cast<double>(n);
  }
  return means;
}

MeanRowCorrelations clamp_mean_correlations(MeanRowCorrelations means, double delta) {
  require(delta > 0.0 && delta <= 0.01, ErrorKind::InvalidArgument,
          "clamp distance must lie in (0, 0.01]");
  for (double& value : means.values) {
    value = std::clamp(value, -1.0 + delta, 1.0);
  }
  return means;
}

MeanCorrelationSet mean_rows_of(const CorrelationSet& correlations) {
  MeanCorrelationSet means;
  for (const auto& [group, correlation] : correlations) {
    means.emplace(group, mean_row_correlation(correlation));
  }
  return means;
}

}  // namespace cast
