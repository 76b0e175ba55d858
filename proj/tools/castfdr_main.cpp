#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "castfdr/io.hpp"
#include "castfdr/procedures.hpp"
#include "castfdr/simulation.hpp"

namespace {

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::string::size_type start = 0;
  while (start <= text.size()) {
    const auto stop = text.find(',', start);
    const std::string field =
        text.substr(start, stop == std::string::npos ? std::string::npos : stop - start);
    try {
      std::size_t used = 0;
      values.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw cast::Error(cast::ErrorKind::ParseError, "'" + field + "' is not a number");
    }
    if (stop == std::string::npos) break;
    start = stop + 1;
  }
  return values;
}

std::vector<cast::Method> parse_method_list(const std::string& text) {
  std::vector<cast::Method> methods;
  std::string::size_type start = 0;
  while (start <= text.size()) {
    const auto stop = text.find(',', start);
    std::string field =
        text.substr(start, stop == std::string::npos ? std::string::npos : stop - start);
    const auto first = field.find_first_not_of(" \t");
    const auto last = field.find_last_not_of(" \t");
    if (first != std::string::npos) field = field.substr(first, last - first + 1);
    methods.push_back(cast::parse_method(field));
    if (stop == std::string::npos) break;
    start = stop + 1;
  }
  return methods;
}

int run_adjust(const std::string& input, const std::string& matrix,
               const std::string& phenotype, const std::string& annotation,
               const std::string& correlations_path, const std::string& method_name,
               const std::string& variant_name, double alpha, const std::string& output) {
  const cast::Method method = cast::parse_method(method_name);

  cast::GroupedPValueSet set = [&] {
    if (!input.empty()) return cast::read_pvalue_table(input);
    cast::AnnotatedData data =
        cast::read_annotated_matrix(matrix, phenotype, annotation);
    for (const std::string& warning : data.warnings) {
      std::cerr << "warning: " << warning << "\n";
    }
    const cast::MatrixPValues tested =
        cast::matrix_pvalues(data.matrix, data.phenotype, cast::parse_test_variant(variant_name));
    if (!tested.degenerate_rows.empty()) {
      std::cerr << "warning: " << tested.degenerate_rows.size()
                << " features are constant in both classes\n";
    }
    std::vector<cast::PValueEntry> entries;
    entries.reserve(data.matrix.features.size());
    for (std::size_t i = 0; i < data.matrix.features.size(); ++i) {
      entries.push_back(
          {data.matrix.features[i], data.group_by_feature[i], tested.pvalues[i]});
    }
    return cast::GroupedPValueSet::validate(std::move(entries));
  }();

  cast::MeanCorrelationSet means;
  bool have_means = false;
  if (cast::method_uses_correlations(method)) {
    if (!correlations_path.empty()) {
      means = cast::read_correlations(correlations_path, set);
      have_means = true;
    } else if (!matrix.empty()) {
      // Estimate from the same matrix that produced the p-values.
      cast::AnnotatedData data =
          cast::read_annotated_matrix(matrix, phenotype, annotation);
      std::map<cast::GroupId, std::vector<std::size_t>> rows_by_group;
      for (std::size_t i = 0; i < data.matrix.features.size(); ++i) {
        rows_by_group[data.group_by_feature[i]].push_back(i);
      }
      for (const auto& [group, rows] : rows_by_group) {
        if (rows.size() < 2) continue;
        std::vector<cast::FeatureId> order;
        Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()),
                               static_cast<Eigen::Index>(data.matrix.subjects));
        for (std::size_t local = 0; local < rows.size(); ++local) {
          order.push_back(data.matrix.features[rows[local]]);
          const auto row = data.matrix.row(rows[local]);
          for (std::size_t s = 0; s < data.matrix.subjects; ++s) {
            values(static_cast<Eigen::Index>(local), static_cast<Eigen::Index>(s)) = row[s];
          }
        }
        means.emplace(group, cast::mean_row_correlation(cast::pearson_group_correlation(
                                 group, std::move(order), values)));
      }
      have_means = true;
    } else {
      throw cast::Error(cast::ErrorKind::MissingCorrelation,
                        "method '" + method_name +
                            "' needs --correlations (or a data matrix to estimate from)");
    }
  } else if (!correlations_path.empty()) {
    std::cerr << "warning: --correlations is ignored by method '" << method_name << "'\n";
  }

  const cast::AdjustmentResult result =
      cast::run_adjustment(set, have_means ? &means : nullptr, method, alpha);
  const std::filesystem::path out_path = cast::resolve_output_path(output);
  cast::write_adjustment(result, out_path);

  std::cout << "method=" << cast::method_name(result.method)
            << " alpha=" << cast::format_number(result.alpha)
            << " features=" << set.total_features() << " groups=" << set.group_count()
            << " rejections=" << result.rejections << "\n";
  std::cout << "wrote " << out_path.string() << " and " << out_path.string() << ".groups\n";
  return 0;
}

int run_simulate(const std::string& config_path, const std::string& output_dir,
                 std::size_t replicates_override, bool have_seed_override,
                 std::uint64_t seed_override, std::size_t threads) {
  if (threads == 0) threads = cast::env_thread_count(1);
  cast::StudyConfig config = cast::read_study_config(config_path);
  if (replicates_override > 0) {
    for (cast::SimulationScenario& scenario : config.grid) {
      scenario.replicates = replicates_override;
    }
  }
  if (have_seed_override) config.master_seed = seed_override;

  const cast::StudyResult study =
      cast::run_study(config.grid, config.master_seed, threads);
  const std::filesystem::path directory = cast::resolve_output_path(output_dir);
  cast::write_study_outputs(study, directory);

  for (std::size_t point = 0; point < study.reports.size(); ++point) {
    for (const cast::MethodSummary& method : study.reports[point].methods) {
      std::cout << "scenario " << point << " " << cast::method_name(method.method)
                << ": R=" << cast::format_number(method.rejections.mean)
                << " FDR=" << cast::format_number(method.fdr.mean)
                << " TPR=" << cast::format_number(method.tpr.mean) << "\n";
    }
  }
  std::cout << "wrote " << (directory / "summary.tsv").string() << "\n";
  return 0;
}

int run_thresholds(std::size_t group_size, const std::string& rbar_list,
                   const std::string& method_list, double alpha, const std::string& output) {
  const std::vector<double> rbars = parse_double_list(rbar_list);
  const std::vector<cast::Method> methods = parse_method_list(method_list);
  const std::vector<cast::ThresholdRow> rows =
      cast::threshold_table(group_size, rbars, methods, alpha);
  const std::filesystem::path out_path = cast::resolve_output_path(output);
  cast::write_threshold_table(rows, out_path);
  std::cout << "wrote " << rows.size() << " rows to " << out_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grouped false discovery rate control with correlation-adjusted step-up procedures"};
  app.require_subcommand(1);

  std::string input;
  std::string matrix;
  std::string phenotype;
  std::string annotation;
  std::string correlations_path;
  std::string method_name;
  std::string variant_name = "pooled";
  double alpha = 0.05;
  std::string output;

  CLI::App* adjust = app.add_subcommand("adjust", "Adjust p-values and call rejections");
  adjust->add_option("--input", input, "p-value table (feature, group, pvalue)");
  adjust->add_option("--matrix", matrix, "data matrix (feature rows, subject columns)");
  adjust->add_option("--phenotype", phenotype, "subject phenotype table (subject, 0/1)");
  adjust->add_option("--annotation", annotation, "feature annotation table (feature, group)");
  adjust->add_option("--correlations", correlations_path,
                     "correlation file (pairwise entries or mean rows)");
  adjust->add_option("--method", method_name,
                     "bonferroni, bh, by, gbh, gby, lcast or qcast")->required();
  adjust->add_option("--test", variant_name, "pooled or welch (matrix input only)");
  adjust->add_option("--alpha", alpha, "target false discovery rate");
  adjust->add_option("--output", output, "per-feature output table")->required();

  std::string config_path;
  std::string output_dir;
  std::size_t replicates_override = 0;
  std::uint64_t seed_override = 0;
  std::size_t threads = 0;  // 0 means: take $CASTFDR_THREADS, else 1

  CLI::App* simulate = app.add_subcommand("simulate", "Run a synthetic study from a config file");
  simulate->add_option("--config", config_path, "flat key = value scenario file")->required();
  simulate->add_option("--output-dir", output_dir, "directory for summary and count tables")
      ->required();
  simulate->add_option("--replicates", replicates_override,
                       "override the replicate count of every scenario");
  CLI::Option* seed_option =
      simulate->add_option("--seed", seed_override, "override the master seed");
  simulate->add_option("--threads", threads, "worker threads for replicates");

  std::size_t group_size = 0;
  std::string rbar_list = "-0.9,-0.5,0,0.5,0.9";
  std::string method_list = "gbh,gby,lcast,qcast";
  double threshold_alpha = 0.05;
  std::string threshold_output;

  CLI::App* thresholds =
      app.add_subcommand("thresholds", "Tabulate rejection thresholds by rank");
  thresholds->add_option("--group-size", group_size, "features in the group")->required();
  thresholds->add_option("--rbar", rbar_list, "comma list of constant mean correlations");
  thresholds->add_option("--methods", method_list, "comma list of methods");
  thresholds->add_option("--alpha", threshold_alpha, "target false discovery rate");
  thresholds->add_option("--output", threshold_output, "threshold table path")->required();

  try {
    app.parse(argc, argv);
    if (adjust->parsed()) {
      const bool from_table = !input.empty();
      const bool from_matrix = !matrix.empty() || !phenotype.empty() || !annotation.empty();
      if (from_table == from_matrix) {
        throw cast::Error(cast::ErrorKind::InvalidArgument,
                          "give either --input or the --matrix/--phenotype/--annotation trio");
      }
      if (from_matrix && (matrix.empty() || phenotype.empty() || annotation.empty())) {
        throw cast::Error(cast::ErrorKind::InvalidArgument,
                          "matrix input needs --matrix, --phenotype and --annotation");
      }
      return run_adjust(input, matrix, phenotype, annotation, correlations_path,
                        method_name, variant_name, alpha, output);
    }
    if (simulate->parsed()) {
      return run_simulate(config_path, output_dir, replicates_override,
                          seed_option->count() > 0, seed_override, threads);
    }
    return run_thresholds(group_size, rbar_list, method_list, threshold_alpha,
                          threshold_output);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const cast::Error& e) {
    std::cerr << "error: " << cast::error_kind_name(e.kind()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
}
