#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "castfdr/core.hpp"
#include "castfdr/correlation.hpp"

namespace cast {

// Sum of reciprocal ranks 1 + 1/2 + ... + 1/M_g, the classic dependence
// correction for a block of M_g tests.
double harmonic_factor(std::size_t group_size);

// Correlation-adjusted correction for the linear step-up procedure:
// sum over ranks j of (1 + rbar_(j)) / (j + rbar_(j)), where rbar_(j) is the
// mean row correlation of the feature holding rank j. The first term cancels
// to exactly 1 whenever rbar_(1) > -1; at rbar_(1) = -1 (within 1e-12) the
// sum is undefined and FallbackTriggered is thrown so callers can substitute
// the harmonic factor.
double lcast_factor(std::span<const double> mean_correlations_by_rank);

// Rank-specific correction M_g * (1 + rbar) / (rank + rbar). Rank 1 cancels
// to exactly M_g; rank 1 with rbar = -1 (within 1e-12) throws
// FallbackTriggered.
double qcast_factor(std::size_t group_size, std::size_t rank, double mean_correlation);

// Fraction M_g / min(G * M_g, M) in (0, 1] spent on one group by the
// simultaneous budget split.
double between_group_factor(std::size_t group_count, std::size_t group_size,
                            std::size_t total_features);

// Everything a scale computation needs to know about the block it runs in.
// For pooled methods the block is the whole collection (group_size == total).
// mean_correlations holds the per-rank values for the correlation-adjusted
// methods, unclamped; the rank-1 entry decides the harmonic fallback.
struct GroupContext {
  std::size_t group_size = 0;       // M_g
  std::size_t group_count = 1;      // G
  std::size_t total_features = 0;   // M
  double pi0 = 1.0;
  std::span<const double> mean_correlations{};
};

// Scale s(j) such that the step-up procedure compares P_(j) against
// alpha * s(j). Substitutes the harmonic factor when the correlation
// adjustment is undefined and reports that through *fallback_used.
double threshold_scale(Method method, const GroupContext& context, std::size_t rank,
                       bool* fallback_used = nullptr);

// Largest rank r with P_(r) <= thresholds[r-1], scanning from the top; 0 when
// no rank passes. Thresholds may be non-monotone.
std::size_t step_up(std::span<const double> sorted_pvalues,
                    std::span<const double> thresholds);

// q_(j) = min(1, min over k >= j of P_(k) / s(k)). Non-decreasing in rank,
// and q_(j) <= alpha exactly when the step-up rule at level alpha rejects
// rank j.
std::vector<double> adjusted_pvalues(std::span<const double> sorted_pvalues,
                                     std::span<const double> scales);

struct FeatureResult {
  FeatureId feature;
  GroupId group;
  double pvalue = 0.0;
  std::size_t rank = 0;  // within the feature's block, 1-based
  double adjusted = 1.0;
  bool rejected = false;
};

struct GroupDiagnostics {
  GroupId group;               // "*" for the pooled block
  std::size_t size = 0;
  double pi0 = 1.0;
  double between_factor = 1.0;
  bool fallback_used = false;
  // Correction in force at rank 1; the full per-rank profile is kept only
  // when the correction varies by rank.
  double correction = 1.0;
  std::vector<double> correction_by_rank;
};

struct AdjustmentResult {
  Method method = Method::BH;
  double alpha = 0.05;
  std::size_t rejections = 0;
  std::vector<FeatureResult> features;    // blocks in group order, ranks ascending
  std::vector<GroupDiagnostics> groups;
};

// Full procedure over a validated set: per-block null-proportion estimates,
// correction factors, adjusted p-values and accept/reject calls at `alpha`.
// `correlations` supplies unclamped mean row correlations and is required
// (and consulted) only by the correlation-adjusted methods; singleton groups
// never need an entry.
AdjustmentResult run_adjustment(const GroupedPValueSet& set,
                                const MeanCorrelationSet* correlations,
                                Method method, double alpha);

}  // namespace cast
