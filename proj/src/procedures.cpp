#include "castfdr/procedures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "castfdr/pi0.hpp"

namespace cast {

namespace {

void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

void check_mean_correlation(double value) {
  require(value >= -1.0 && value <= 1.0, ErrorKind::InvalidArgument,
          "mean correlation " + std::to_string(value) + " outside [-1, 1]");
}

bool at_singular_point(double mean_correlation) {
  return std::abs(mean_correlation + 1.0) <= kFallbackTolerance;
}

}  // namespace

double harmonic_factor(std::size_t group_size) {
  require(group_size >= 1, ErrorKind::InvalidArgument, "group size must be at least 1");
  double sum = 0.0;
  for (std::size_t j = 1; j <= group_size; ++j) sum += 1.0 / static_cast<double>(j);
  return sum;
}

double lcast_factor(std::span<const double> mean_correlations_by_rank) {
  require(!mean_correlations_by_rank.empty(), ErrorKind::EmptyInput,
          "correction needs at least one mean correlation");
  for (double value : mean_correlations_by_rank) check_mean_correlation(value);
  if (at_singular_point(mean_correlations_by_rank[0])) {
    throw FallbackTriggered("rank-1 mean correlation of -1 leaves the linear correction undefined");
  }
  double sum = 1.0;  // rank-1 term (1 + r) / (1 + r) cancels exactly
  for (std::size_t j = 2; j <= mean_correlations_by_rank.size(); ++j) {
    const double r = mean_correlations_by_rank[j - 1];
    sum += (1.0 + r) / (static_cast<double>(j) + r);
  }
  return sum;
}

double qcast_factor(std::size_t group_size, std::size_t rank, double mean_correlation) {
  require(group_size >= 1, ErrorKind::InvalidArgument, "group size must be at least 1");
  require(rank >= 1 && rank <= group_size, ErrorKind::InvalidArgument,
          "rank must lie in [1, group size]");
  check_mean_correlation(mean_correlation);
  if (rank == 1) {
    if (at_singular_point(mean_correlation)) {
      throw FallbackTriggered("rank-1 mean correlation of -1 leaves the correction undefined");
    }
    return static_cast<double>(group_size);  // the ratio cancels exactly
  }
  return static_cast<double>(group_size) * (1.0 + mean_correlation) /
         (static_cast<double>(rank) + mean_correlation);
}

double between_group_factor(std::size_t group_count, std::size_t group_size,
                            std::size_t total_features) {
  require(group_count >= 1, ErrorKind::InvalidArgument, "group count must be at least 1");
  require(group_size >= 1 && group_size <= total_features, ErrorKind::InvalidArgument,
          "group size must lie in [1, total features]");
  const double spread = std::min(static_cast<double>(group_count) * static_cast<double>(group_size),
                                 static_cast<double>(total_features));
  return static_cast<double>(group_size) / spread;
}

double threshold_scale(Method method, const GroupContext& context, std::size_t rank,
                       bool* fallback_used) {
  require(context.group_size >= 1, ErrorKind::InvalidArgument, "block size must be at least 1");
  require(rank >= 1 && rank <= context.group_size, ErrorKind::InvalidArgument,
          "rank must lie in [1, block size]");
  require(context.pi0 > 0.0 && context.pi0 <= 1.0, ErrorKind::InvalidArgument,
          "null proportion must lie in (0, 1]");
  if (fallback_used != nullptr) *fallback_used = false;

  const double j = static_cast<double>(rank);
  const double m_g = static_cast<double>(context.group_size);
  const double m = static_cast<double>(context.total_features);

  switch (method) {
    case Method::Bonferroni:
      require(context.total_features >= 1, ErrorKind::InvalidArgument,
              "total feature count must be at least 1");
      return 1.0 / m;
    case Method::BH:
      return j / (context.pi0 * m);
    case Method::BY:
      return j / (context.pi0 * m * harmonic_factor(context.total_features));
    case Method::GBH:
      return j / (context.pi0 * m_g);
    case Method::GBY:
      return j / (context.pi0 * m_g * harmonic_factor(context.group_size));
    case Method::LCAST:
    case Method::QCAST:
      break;
  }

  require(context.mean_correlations.size() == context.group_size, ErrorKind::MissingCorrelation,
          "mean correlations must cover every rank of the block");
  const double spread = std::min(static_cast<double>(context.group_count) * m_g, m);
  double correction = 0.0;
  try {
    if (method == Method::LCAST) {
      correction = lcast_factor(context.mean_correlations);
    } else {
      // The rank-1 value governs the fallback for the whole block, so probe
      // it even when computing a later rank.
      qcast_factor(context.group_size, 1, context.mean_correlations[0]);
      correction = qcast_factor(context.group_size, rank,
                                context.mean_correlations[rank - 1]);
    }
  } catch (const FallbackTriggered&) {
    correction = harmonic_factor(context.group_size);
    if (fallback_used != nullptr) *fallback_used = true;
  }
  return j / (context.pi0 * spread * correction);
}

std::size_t step_up(std::span<const double> sorted_pvalues,
                    std::span<const double> thresholds) {
  require(sorted_pvalues.size() == thresholds.size(), ErrorKind::InvalidArgument,
          "p-values and thresholds must have equal length");
  for (std::size_t i = 1; i < sorted_pvalues.size(); ++i) {
    require(sorted_pvalues[i] >= sorted_pvalues[i - 1], ErrorKind::UnsortedInput,
            "p-values must be sorted ascending");
  }
  for (double t : thresholds) {
    require(t >= 0.0 && !std::isnan(t), ErrorKind::InvalidArgument,
            "thresholds must be non-negative");
  }
  for (std::size_t j = sorted_pvalues.size(); j >= 1; --j) {
    if (sorted_pvalues[j - 1] <= thresholds[j - 1]) return j;
  }
  return 0;
}

std::vector<double> adjusted_pvalues(std::span<const double> sorted_pvalues,
                                     std::span<const double> scales) {
  require(sorted_pvalues.size() == scales.size(), ErrorKind::InvalidArgument,
          "p-values and scales must have equal length");
  for (double s : scales) {
    require(s > 0.0 && !std::isnan(s), ErrorKind::InvalidArgument,
            "scales must be positive");
  }
  std::vector<double> adjusted(sorted_pvalues.size());
  double suffix_min = std::numeric_limits<double>::infinity();
  for (std::size_t j = sorted_pvalues.size(); j >= 1; --j) {
    suffix_min = std::min(suffix_min, sorted_pvalues[j - 1] / scales[j - 1]);
    adjusted[j - 1] = std::min(1.0, suffix_min);
  }
  return adjusted;
}

namespace {

// Indices of `entries` ordered by ascending p-value, feature id breaking ties.
std::vector<std::size_t> rank_order(std::span<const PValueEntry> entries) {
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (entries[a].pvalue != entries[b].pvalue) return entries[a].pvalue < entries[b].pvalue;
    return entries[a].feature < entries[b].feature;
  });
  return order;
}

// Scales plus the diagnostics that fall out of computing them for one block.
struct BlockScales {
  std::vector<double> scales;
  double correction = 1.0;
  std::vector<double> correction_by_rank;
  bool fallback_used = false;
  double between_factor = 1.0;
};

BlockScales pooled_scales(Method method, std::size_t total, double pi0) {
  BlockScales block;
  block.scales.resize(total);
  const double m = static_cast<double>(total);
  switch (method) {
    case Method::Bonferroni:
      std::fill(block.scales.begin(), block.scales.end(), 1.0 / m);
      break;
    case Method::BH:
      for (std::size_t j = 1; j <= total; ++j) {
        block.scales[j - 1] = static_cast<double>(j) / (pi0 * m);
      }
      break;
    case Method::BY: {
      block.correction = harmonic_factor(total);
      for (std::size_t j = 1; j <= total; ++j) {
        block.scales[j - 1] = static_cast<double>(j) / (pi0 * m * block.correction);
      }
      break;
    }
    default:
      throw Error(ErrorKind::InvalidArgument, "not a pooled method");
  }
  return block;
}

BlockScales grouped_scales(Method method, std::size_t group_count, std::size_t group_size,
                           std::size_t total, double pi0,
                           std::span<const double> raw_mean_correlations) {
  BlockScales block;
  block.scales.resize(group_size);
  const double m_g = static_cast<double>(group_size);

  if (method == Method::GBH || method == Method::GBY) {
    double denominator = pi0 * m_g;
    if (method == Method::GBY) {
      block.correction = harmonic_factor(group_size);
      denominator *= block.correction;
    }
    for (std::size_t j = 1; j <= group_size; ++j) {
      block.scales[j - 1] = static_cast<double>(j) / denominator;
    }
    return block;
  }

  block.between_factor = between_group_factor(group_count, group_size, total);
  const double spread = std::min(static_cast<double>(group_count) * m_g,
                                 static_cast<double>(total));
  block.fallback_used = at_singular_point(raw_mean_correlations[0]);

  if (block.fallback_used) {
    block.correction = harmonic_factor(group_size);
    const double denominator = pi0 * spread * block.correction;
    for (std::size_t j = 1; j <= group_size; ++j) {
      block.scales[j - 1] = static_cast<double>(j) / denominator;
    }
    if (method == Method::QCAST) {
      block.correction_by_rank.assign(group_size, block.correction);
    }
    return block;
  }

  std::vector<double> clamped(raw_mean_correlations.begin(), raw_mean_correlations.end());
  for (double& value : clamped) value = std::clamp(value, -1.0 + kDefaultClampDelta, 1.0);

  if (method == Method::LCAST) {
    block.correction = lcast_factor(clamped);
    const double denominator = pi0 * spread * block.correction;
    for (std::size_t j = 1; j <= group_size; ++j) {
      block.scales[j - 1] = static_cast<double>(j) / denominator;
    }
  } else {
    block.correction_by_rank.resize(group_size);
    for (std::size_t j = 1; j <= group_size; ++j) {
      const double c_j = qcast_factor(group_size, j, clamped[j - 1]);
      block.correction_by_rank[j - 1] = c_j;
      block.scales[j - 1] = static_cast<double>(j) / (pi0 * spread * c_j);
    }
    block.correction = block.correction_by_rank[0];
  }
  return block;
}

// Mean correlations for one group arranged by that group's p-value ranks.
std::vector<double> correlations_by_rank(const GroupId& group,
                                         std::span<const PValueEntry> entries,
                                         std::span<const std::size_t> order,
                                         const MeanCorrelationSet* correlations) {
  if (entries.size() == 1) return {1.0};  // lone feature correlates only with itself
  if (correlations == nullptr) {
    throw Error(ErrorKind::MissingCorrelation,
                "method requires mean row correlations but none were given");
  }
  auto it = correlations->find(group);
  if (it == correlations->end()) {
    throw Error(ErrorKind::MissingCorrelation,
                "no correlations given for group '" + group + "'");
  }
  const MeanRowCorrelations& means = it->second;
  if (means.order.size() != means.values.size() || means.order.size() != entries.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "correlations for group '" + group + "' do not match its feature count");
  }
  std::unordered_map<std::string_view, double> by_feature;
  by_feature.reserve(means.order.size());
  for (std::size_t i = 0; i < means.order.size(); ++i) {
    by_feature.emplace(means.order[i], means.values[i]);
  }
  std::vector<double> by_rank(entries.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    auto hit = by_feature.find(entries[order[j]].feature);
    if (hit == by_feature.end()) {
      throw Error(ErrorKind::MissingCorrelation,
                  "feature '" + entries[order[j]].feature +
                      "' has no mean correlation in group '" + group + "'");
    }
    check_mean_correlation(hit->second);
    by_rank[j] = hit->second;
  }
  return by_rank;
}

}  // namespace

AdjustmentResult run_adjustment(const GroupedPValueSet& set,
                                const MeanCorrelationSet* correlations,
                                Method method, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument,
          "alpha must lie strictly between 0 and 1");

  AdjustmentResult result;
  result.method = method;
  result.alpha = alpha;
  result.features.reserve(set.total_features());

  // Rejections come from the adjusted p-values so that "rejected" and
  // "adjusted <= alpha" can never disagree; the step-up scan gives the same
  // answer by construction.
  auto emit_block = [&](const GroupId& label, std::span<const PValueEntry> entries,
                        std::span<const std::size_t> order, double pi0,
                        BlockScales block) {
    std::vector<double> sorted(entries.size());
    for (std::size_t j = 0; j < order.size(); ++j) sorted[j] = entries[order[j]].pvalue;
    const std::vector<double> adjusted = adjusted_pvalues(sorted, block.scales);
    for (std::size_t j = 0; j < order.size(); ++j) {
      const PValueEntry& entry = entries[order[j]];
      const bool rejected = adjusted[j] <= alpha;
      if (rejected) ++result.rejections;
      result.features.push_back(
          {entry.feature, entry.group, entry.pvalue, j + 1, adjusted[j], rejected});
    }
    GroupDiagnostics diagnostics;
    diagnostics.group = label;
    diagnostics.size = entries.size();
    diagnostics.pi0 = pi0;
    diagnostics.between_factor = block.between_factor;
    diagnostics.fallback_used = block.fallback_used;
    diagnostics.correction = block.correction;
    diagnostics.correction_by_rank = std::move(block.correction_by_rank);
    result.groups.push_back(std::move(diagnostics));
  };

  if (!method_uses_groups(method)) {
    std::span<const PValueEntry> entries(set.entries());
    const std::vector<std::size_t> order = rank_order(entries);
    double pi0 = 1.0;
    if (method == Method::BH || method == Method::BY) {
      std::vector<double> sorted(entries.size());
      for (std::size_t j = 0; j < order.size(); ++j) sorted[j] = entries[order[j]].pvalue;
      pi0 = estimate_pi0_lsl(sorted);
    }
    emit_block("*", entries, order, pi0, pooled_scales(method, set.total_features(), pi0));
    return result;
  }

  for (std::size_t g = 0; g < set.group_count(); ++g) {
    const std::span<const PValueEntry> entries = set.group_entries(g);
    const std::vector<std::size_t> order = rank_order(entries);
    std::vector<double> sorted(entries.size());
    for (std::size_t j = 0; j < order.size(); ++j) sorted[j] = entries[order[j]].pvalue;
    const double pi0 = estimate_pi0_lsl(sorted);

    std::vector<double> by_rank;
    std::span<const double> raw;
    if (method_uses_correlations(method)) {
      by_rank = correlations_by_rank(set.groups()[g], entries, order, correlations);
      raw = by_rank;
    }
    emit_block(set.groups()[g], entries, order, pi0,
               grouped_scales(method, set.group_count(), entries.size(),
                              set.total_features(), pi0, raw));
  }
  return result;
}

}  // namespace cast
