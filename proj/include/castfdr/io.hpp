#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "castfdr/core.hpp"
#include "castfdr/correlation.hpp"
#include "castfdr/procedures.hpp"
#include "castfdr/simulation.hpp"
#include "castfdr/testing.hpp"

namespace cast {

// Fixed-precision rendering (6 significant digits) used by every writer, so
// repeated runs produce byte-identical files.
std::string format_number(double value);

// Delimited table of feature, group and pvalue columns (tab or comma,
// located by header name, extra columns ignored), validated into a set.
GroupedPValueSet read_pvalue_table(const std::filesystem::path& path);

// Two layouts, told apart by the header:
//   group feature_a feature_b correlation   pairwise entries, rest zero
//   group feature mean_correlation          precomputed row means
// Either way the result feeds the correlation-adjusted procedures directly.
MeanCorrelationSet read_correlations(const std::filesystem::path& path,
                                     const GroupedPValueSet& set);

struct AnnotatedData {
  DataMatrix matrix;
  PhenotypeVector phenotype;
  std::vector<GroupId> group_by_feature;  // aligned with matrix.features
  std::vector<std::string> warnings;
};

// Matrix (feature rows, subject columns), phenotype (subject, 0/1) and
// annotation (feature, group) files. Subjects align by identifier;
// unannotated features become their own singleton group with a warning.
AnnotatedData read_annotated_matrix(const std::filesystem::path& matrix_path,
                                    const std::filesystem::path& phenotype_path,
                                    const std::filesystem::path& annotation_path);

// Per-feature table plus a "<path>.groups" sidecar with the per-group
// diagnostics. Output re-parses with read_pvalue_table.
void write_adjustment(const AdjustmentResult& result, const std::filesystem::path& path);

struct ThresholdRow {
  Method method = Method::BH;
  std::size_t group_size = 0;
  double mean_correlation = 0.0;
  std::size_t rank = 0;
  double threshold = 0.0;
};

// Rejection thresholds alpha * s(rank) for one group size over a grid of
// constant mean correlations, with the null proportion pinned to 1 and the
// group standing alone, so rows depend only on the advertised inputs.
std::vector<ThresholdRow> threshold_table(std::size_t group_size,
                                          std::span<const double> mean_correlations,
                                          std::span<const Method> methods, double alpha);

void write_threshold_table(std::span<const ThresholdRow> rows,
                           const std::filesystem::path& path);
std::vector<ThresholdRow> read_threshold_table(const std::filesystem::path& path);

struct StudyConfig {
  std::vector<SimulationScenario> grid;
  std::uint64_t master_seed = 1;
};

// Flat "key = value" file; '#' starts a comment. List-valued keys span the
// grid: groups and features advance together, case_fraction, signal_shift,
// nonnull_fraction and coupling_prob cross.
StudyConfig read_study_config(const std::filesystem::path& path);

// summary.tsv (per scenario and method), counts_NNN.tsv (per replicate) and
// table.txt (aligned text) under `directory`, created if needed.
void write_study_outputs(const StudyResult& study, const std::filesystem::path& directory);

// Relative output paths move under $CASTFDR_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output_path(const std::filesystem::path& path);

// $CASTFDR_THREADS, or `fallback` when unset.
std::size_t env_thread_count(std::size_t fallback = 1);

}  // namespace cast
