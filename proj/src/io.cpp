#include "castfdr/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace cast {

namespace {

void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  for (;;) {
    const auto stop = line.find(delimiter, start);
    if (stop == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, stop - start)));
    start = stop + 1;
  }
}

// Header-addressed delimited text; tabs or commas, chosen by the header row.
// Blank lines and lines starting with '#' are skipped.
class TableReader {
 public:
  explicit TableReader(const std::filesystem::path& path)
      : path_(path.string()), in_(path) {
    require(static_cast<bool>(in_), ErrorKind::IoError, "cannot open '" + path_ + "'");
    std::string line;
    bool found = false;
    while (std::getline(in_, line)) {
      ++line_number_;
      line = trim(line);
      if (!line.empty() && line[0] != '#') {
        found = true;
        break;
      }
    }
    require(found, ErrorKind::ParseError, "'" + path_ + "' has no header row");
    delimiter_ = line.find('\t') != std::string::npos ? '\t' : ',';
    columns_ = split_fields(line, delimiter_);
  }

  bool has_column(const std::string& name) const {
    return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
  }

  std::size_t column(const std::string& name) const {
    const auto it = std::find(columns_.begin(), columns_.end(), name);
    require(it != columns_.end(), ErrorKind::ParseError,
            "'" + path_ + "' lacks a '" + name + "' column");
    return static_cast<std::size_t>(it - columns_.begin());
  }

  const std::vector<std::string>& columns() const { return columns_; }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_number_;
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      fields = split_fields(line, delimiter_);
      require(fields.size() == columns_.size(), ErrorKind::ParseError,
              where() + ": expected " + std::to_string(columns_.size()) + " fields, got " +
                  std::to_string(fields.size()));
      return true;
    }
    return false;
  }

  std::string where() const { return path_ + ":" + std::to_string(line_number_); }

  double parse_double(const std::string& field) const {
    errno = 0;
    char* end = nullptr;
    const double value = std::strtod(field.c_str(), &end);
    require(end != field.c_str() && *end == '\0' && errno != ERANGE, ErrorKind::ParseError,
            where() + ": '" + field + "' is not a number");
    return value;
  }

  std::size_t parse_size(const std::string& field) const {
    errno = 0;
    char* end = nullptr;
    const unsigned long long value = std::strtoull(field.c_str(), &end, 10);
    require(end != field.c_str() && *end == '\0' && errno != ERANGE &&
                field.find('-') == std::string::npos,
            ErrorKind::ParseError, where() + ": '" + field + "' is not a count");
    return static_cast<std::size_t>(value);
  }

 private:
  std::string path_;
  std::ifstream in_;
  char delimiter_ = '\t';
  std::vector<std::string> columns_;
  std::size_t line_number_ = 0;
};

void create_parent_directories(const std::filesystem::path& path) {
  const std::filesystem::path parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::ofstream open_output(const std::filesystem::path& path) {
  create_parent_directories(path);
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::IoError,
          "cannot write '" + path.string() + "'");
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  require(static_cast<bool>(out), ErrorKind::IoError,
          "failed while writing '" + path.string() + "'");
}

}  // namespace

std::string format_number(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6g", value);
  return buffer;
}

GroupedPValueSet read_pvalue_table(const std::filesystem::path& path) {
  TableReader reader(path);
  const std::size_t feature_column = reader.column("feature");
  const std::size_t group_column = reader.column("group");
  const std::size_t pvalue_column = reader.column("pvalue");

  std::vector<PValueEntry> entries;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    entries.push_back({fields[feature_column], fields[group_column],
                       reader.parse_double(fields[pvalue_column])});
  }
  return GroupedPValueSet::validate(std::move(entries));
}

namespace {

// Feature position within one group's canonical (lexicographic) order.
std::size_t local_index(const GroupedPValueSet& set, std::size_t group,
                        const std::string& feature, const TableReader& reader) {
  const std::span<const PValueEntry> entries = set.group_entries(group);
  const auto it = std::lower_bound(entries.begin(), entries.end(), feature,
                                   [](const PValueEntry& entry, const std::string& name) {
                                     return entry.feature < name;
                                   });
  require(it != entries.end() && it->feature == feature, ErrorKind::ParseError,
          reader.where() + ": feature '" + feature + "' is not in group '" +
              set.groups()[group] + "'");
  return static_cast<std::size_t>(it - entries.begin());
}

MeanCorrelationSet read_pairwise_correlations(TableReader& reader,
                                              const GroupedPValueSet& set) {
  const std::size_t group_column = reader.column("group");
  const std::size_t a_column = reader.column("feature_a");
  const std::size_t b_column = reader.column("feature_b");
  const std::size_t value_column = reader.column("correlation");

  struct Partial {
    Eigen::MatrixXd matrix;
    std::unordered_set<std::size_t> filled;  // i * size + j with i < j
  };
  std::map<std::size_t, Partial> partial;  // by group index

  std::vector<std::string> fields;
  while (reader.next(fields)) {
    const auto group = set.group_index(fields[group_column]);
    require(group.has_value(), ErrorKind::ParseError,
            reader.where() + ": unknown group '" + fields[group_column] + "'");
    const std::size_t size = set.group_size(*group);
    auto [slot, inserted] = partial.try_emplace(*group);
    if (inserted) {
      slot->second.matrix = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(size),
                                                      static_cast<Eigen::Index>(size));
    }
    std::size_t i = local_index(set, *group, fields[a_column], reader);
    std::size_t j = local_index(set, *group, fields[b_column], reader);
    const double value = reader.parse_double(fields[value_column]);
    require(std::abs(value) <= 1.0, ErrorKind::ParseError,
            reader.where() + ": correlation " + fields[value_column] + " outside [-1, 1]");
    if (i == j) {
      require(std::abs(value - 1.0) <= 1e-9, ErrorKind::ParseError,
              reader.where() + ": diagonal entries must equal 1");
      continue;
    }
    if (i > j) std::swap(i, j);
    const std::size_t key = i * size + j;
    if (!slot->second.filled.insert(key).second) {
      const double previous = slot->second.matrix(static_cast<Eigen::Index>(i),
                                                  static_cast<Eigen::Index>(j));
      require(std::abs(previous - value) <= 1e-12, ErrorKind::ParseError,
              reader.where() + ": conflicting values for one feature pair");
      continue;
    }
    slot->second.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
    slot->second.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
  }

  MeanCorrelationSet means;
  for (auto& [group, slot] : partial) {
    std::vector<FeatureId> order;
    order.reserve(set.group_size(group));
    for (const PValueEntry& entry : set.group_entries(group)) order.push_back(entry.feature);
    means.emplace(set.groups()[group],
                  mean_row_correlation(GroupCorrelation::from_matrix(
                      set.groups()[group], std::move(order), std::move(slot.matrix))));
  }
  return means;
}

MeanCorrelationSet read_direct_correlations(TableReader& reader,
                                            const GroupedPValueSet& set) {
  const std::size_t group_column = reader.column("group");
  const std::size_t feature_column = reader.column("feature");
  const std::size_t value_column = reader.column("mean_correlation");

  std::map<std::size_t, std::unordered_map<std::string, double>> given;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    const auto group = set.group_index(fields[group_column]);
    require(group.has_value(), ErrorKind::ParseError,
            reader.where() + ": unknown group '" + fields[group_column] + "'");
    local_index(set, *group, fields[feature_column], reader);  // membership check
    const double value = reader.parse_double(fields[value_column]);
    require(value >= -1.0 && value <= 1.0, ErrorKind::ParseError,
            reader.where() + ": mean correlation " + fields[value_column] +
                " outside [-1, 1]");
    const auto [it, inserted] = given[*group].emplace(fields[feature_column], value);
    require(inserted || it->second == value, ErrorKind::ParseError,
            reader.where() + ": conflicting values for feature '" + fields[feature_column] +
                "'");
  }

  MeanCorrelationSet means;
  for (const auto& [group, values] : given) {
    MeanRowCorrelations rows;
    rows.group = set.groups()[group];
    for (const PValueEntry& entry : set.group_entries(group)) {
      const auto it = values.find(entry.feature);
      require(it != values.end(), ErrorKind::ParseError,
              "group '" + rows.group + "' lacks a mean correlation for feature '" +
                  entry.feature + "'");
      rows.order.push_back(entry.feature);
      rows.values.push_back(it->second);
    }
    means.emplace(rows.group, std::move(rows));
  }
  return means;
}

}  // namespace

MeanCorrelationSet read_correlations(const std::filesystem::path& path,
                                     const GroupedPValueSet& set) {
  TableReader reader(path);
  if (reader.has_column("feature_a")) return read_pairwise_correlations(reader, set);
  return read_direct_correlations(reader, set);
}

AnnotatedData read_annotated_matrix(const std::filesystem::path& matrix_path,
                                    const std::filesystem::path& phenotype_path,
                                    const std::filesystem::path& annotation_path) {
  AnnotatedData data;

  TableReader matrix_reader(matrix_path);
  require(!matrix_reader.columns().empty() && matrix_reader.columns()[0] == "feature",
          ErrorKind::ParseError,
          "'" + matrix_path.string() + "' must start with a 'feature' column");
  const std::size_t subjects = matrix_reader.columns().size() - 1;
  require(subjects >= 4, ErrorKind::ParseError,
          "'" + matrix_path.string() + "' needs at least four subject columns");
  const std::vector<std::string> subject_ids(matrix_reader.columns().begin() + 1,
                                             matrix_reader.columns().end());

  data.matrix.subjects = subjects;
  std::unordered_set<std::string> seen_features;
  std::vector<std::string> fields;
  while (matrix_reader.next(fields)) {
    require(seen_features.insert(fields[0]).second, ErrorKind::DuplicateFeature,
            matrix_reader.where() + ": feature '" + fields[0] + "' appears more than once");
    data.matrix.features.push_back(fields[0]);
    for (std::size_t s = 0; s < subjects; ++s) {
      data.matrix.values.push_back(matrix_reader.parse_double(fields[s + 1]));
    }
  }
  require(!data.matrix.features.empty(), ErrorKind::EmptyInput,
          "'" + matrix_path.string() + "' has no feature rows");

  TableReader phenotype_reader(phenotype_path);
  const std::size_t subject_column = phenotype_reader.column("subject");
  const std::size_t label_column = phenotype_reader.column("phenotype");
  std::unordered_map<std::string, std::uint8_t> label_by_subject;
  while (phenotype_reader.next(fields)) {
    std::uint8_t label = 0;
    if (fields[label_column] == "1") {
      label = 1;
    } else {
      require(fields[label_column] == "0", ErrorKind::ParseError,
              phenotype_reader.where() + ": phenotype must be 0 or 1");
    }
    require(label_by_subject.emplace(fields[subject_column], label).second,
            ErrorKind::ParseError,
            phenotype_reader.where() + ": subject '" + fields[subject_column] +
                "' listed twice");
  }
  require(label_by_subject.size() == subjects, ErrorKind::SubjectMismatch,
          "phenotype lists " + std::to_string(label_by_subject.size()) +
              " subjects but the matrix has " + std::to_string(subjects));
  std::vector<std::uint8_t> labels(subjects);
  for (std::size_t s = 0; s < subjects; ++s) {
    const auto it = label_by_subject.find(subject_ids[s]);
    require(it != label_by_subject.end(), ErrorKind::SubjectMismatch,
            "subject '" + subject_ids[s] + "' has no phenotype");
    labels[s] = it->second;
  }
  data.phenotype = PhenotypeVector::from_labels(std::move(labels));

  TableReader annotation_reader(annotation_path);
  const std::size_t feature_column = annotation_reader.column("feature");
  const std::size_t group_column = annotation_reader.column("group");
  std::unordered_map<std::string, GroupId> group_by_feature;
  while (annotation_reader.next(fields)) {
    const auto [it, inserted] =
        group_by_feature.emplace(fields[feature_column], fields[group_column]);
    require(inserted || it->second == fields[group_column], ErrorKind::ParseError,
            annotation_reader.where() + ": feature '" + fields[feature_column] +
                "' annotated with two groups");
  }

  std::size_t unannotated = 0;
  data.group_by_feature.reserve(data.matrix.features.size());
  for (const FeatureId& feature : data.matrix.features) {
    const auto it = group_by_feature.find(feature);
    if (it == group_by_feature.end()) {
      // A feature without a group stands alone under its own name.
      data.group_by_feature.push_back(feature);
      ++unannotated;
    } else {
      data.group_by_feature.push_back(it->second);
    }
  }
  if (unannotated > 0) {
    data.warnings.push_back(std::to_string(unannotated) +
                            " features lack annotation and form singleton groups");
  }
  std::size_t unused = 0;
  for (const auto& [feature, group] : group_by_feature) {
    if (!seen_features.contains(feature)) ++unused;
  }
  if (unused > 0) {
    data.warnings.push_back(std::to_string(unused) +
                            " annotated features are absent from the matrix");
  }
  return data;
}

void write_adjustment(const AdjustmentResult& result, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "feature\tgroup\tpvalue\trank\tadjusted\trejected\n";
  for (const FeatureResult& feature : result.features) {
    out << feature.feature << '\t' << feature.group << '\t' << format_number(feature.pvalue)
        << '\t' << feature.rank << '\t' << format_number(feature.adjusted) << '\t'
        << (feature.rejected ? 1 : 0) << '\n';
  }
  finish_output(out, path);

  const std::filesystem::path sidecar(path.string() + ".groups");
  std::ofstream side = open_output(sidecar);
  side << "group\tsize\tpi0\tbetween_factor\tcorrection\tfallback\n";
  for (const GroupDiagnostics& group : result.groups) {
    side << group.group << '\t' << group.size << '\t' << format_number(group.pi0) << '\t'
         << format_number(group.between_factor) << '\t' << format_number(group.correction)
         << '\t' << (group.fallback_used ? 1 : 0) << '\n';
  }
  finish_output(side, sidecar);
}

std::vector<ThresholdRow> threshold_table(std::size_t group_size,
                                          std::span<const double> mean_correlations,
                                          std::span<const Method> methods, double alpha) {
  require(group_size >= 1, ErrorKind::InvalidArgument, "group size must be at least 1");
  require(!mean_correlations.empty(), ErrorKind::EmptyInput,
          "need at least one mean correlation");
  require(!methods.empty(), ErrorKind::EmptyInput, "need at least one method");
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument,
          "alpha must lie strictly between 0 and 1");
  for (double value : mean_correlations) {
    require(value >= -1.0 && value <= 1.0, ErrorKind::InvalidArgument,
            "mean correlation " + format_number(value) + " outside [-1, 1]");
  }

  std::vector<ThresholdRow> rows;
  rows.reserve(methods.size() * mean_correlations.size() * group_size);
  for (const Method method : methods) {
    for (const double value : mean_correlations) {
      const std::vector<double> constant(group_size, value);
      GroupContext context;
      context.group_size = group_size;
      context.group_count = 1;
      context.total_features = group_size;
      context.pi0 = 1.0;
      context.mean_correlations = constant;
      for (std::size_t rank = 1; rank <= group_size; ++rank) {
        rows.push_back({method, group_size, value, rank,
                        alpha * threshold_scale(method, context, rank)});
      }
    }
  }
  return rows;
}

void write_threshold_table(std::span<const ThresholdRow> rows,
                           const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "method\tgroup_size\tmean_correlation\trank\tthreshold\n";
  for (const ThresholdRow& row : rows) {
    out << method_name(row.method) << '\t' << row.group_size << '\t'
        << format_number(row.mean_correlation) << '\t' << row.rank << '\t'
        << format_number(row.threshold) << '\n';
  }
  finish_output(out, path);
}

std::vector<ThresholdRow> read_threshold_table(const std::filesystem::path& path) {
  TableReader reader(path);
  const std::size_t method_column = reader.column("method");
  const std::size_t size_column = reader.column("group_size");
  const std::size_t value_column = reader.column("mean_correlation");
  const std::size_t rank_column = reader.column("rank");
  const std::size_t threshold_column = reader.column("threshold");

  std::vector<ThresholdRow> rows;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    ThresholdRow row;
    try {
      row.method = parse_method(fields[method_column]);
    } catch (const Error&) {
      throw Error(ErrorKind::ParseError,
                  reader.where() + ": unknown method '" + fields[method_column] + "'");
    }
    row.group_size = reader.parse_size(fields[size_column]);
    row.mean_correlation = reader.parse_double(fields[value_column]);
    row.rank = reader.parse_size(fields[rank_column]);
    row.threshold = reader.parse_double(fields[threshold_column]);
    rows.push_back(row);
  }
  return rows;
}

namespace {

// Minimal "key = value" file with '#' comments; every key is known and
// appears at most once.
std::map<std::string, std::string> read_flat_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::map<std::string, std::string> raw;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto equals = line.find('=');
    require(equals != std::string::npos, ErrorKind::ParseError,
            path.string() + ":" + std::to_string(line_number) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, equals));
    const std::string value = trim(line.substr(equals + 1));
    require(!key.empty() && !value.empty(), ErrorKind::ParseError,
            path.string() + ":" + std::to_string(line_number) + ": expected 'key = value'");
    require(raw.emplace(key, value).second, ErrorKind::ParseError,
            path.string() + ":" + std::to_string(line_number) + ": key '" + key +
                "' given twice");
  }
  return raw;
}

class ConfigValues {
 public:
  ConfigValues(std::map<std::string, std::string> raw, std::string origin)
      : raw_(std::move(raw)), origin_(std::move(origin)) {}

  std::optional<std::string> take(const std::string& key) {
    const auto it = raw_.find(key);
    if (it == raw_.end()) return std::nullopt;
    std::string value = it->second;
    raw_.erase(it);
    return value;
  }

  double take_double(const std::string& key, double fallback) {
    const auto value = take(key);
    return value ? parse_double(key, *value) : fallback;
  }

  std::size_t take_size(const std::string& key, std::size_t fallback) {
    const auto value = take(key);
    return value ? parse_size(key, *value) : fallback;
  }

  std::vector<double> take_double_list(const std::string& key, double fallback) {
    const auto value = take(key);
    if (!value) return {fallback};
    std::vector<double> values;
    for (const std::string& field : split_fields(*value, ',')) {
      values.push_back(parse_double(key, field));
    }
    return values;
  }

  std::vector<std::size_t> take_size_list(const std::string& key, std::size_t fallback) {
    const auto value = take(key);
    if (!value) return {fallback};
    std::vector<std::size_t> values;
    for (const std::string& field : split_fields(*value, ',')) {
      values.push_back(parse_size(key, field));
    }
    return values;
  }

  void finish() const {
    require(raw_.empty(), ErrorKind::ParseError,
            origin_ + ": unknown key '" + (raw_.empty() ? "" : raw_.begin()->first) + "'");
  }

  double parse_double(const std::string& key, const std::string& field) const {
    errno = 0;
    char* end = nullptr;
    const double value = std::strtod(field.c_str(), &end);
    require(end != field.c_str() && *end == '\0' && errno != ERANGE, ErrorKind::ParseError,
            origin_ + ": value '" + field + "' of '" + key + "' is not a number");
    return value;
  }

  std::size_t parse_size(const std::string& key, const std::string& field) const {
    errno = 0;
    char* end = nullptr;
    const unsigned long long value = std::strtoull(field.c_str(), &end, 10);
    require(end != field.c_str() && *end == '\0' && errno != ERANGE &&
                field.find('-') == std::string::npos,
            ErrorKind::ParseError,
            origin_ + ": value '" + field + "' of '" + key + "' is not a count");
    return static_cast<std::size_t>(value);
  }

 private:
  std::map<std::string, std::string> raw_;
  std::string origin_;
};

}  // namespace

StudyConfig read_study_config(const std::filesystem::path& path) {
  ConfigValues values(read_flat_config(path), path.string());
  const SimulationScenario defaults;

  StudyConfig config;
  if (const auto seed = values.take("seed")) {
    config.master_seed = values.parse_size("seed", *seed);
  }

  SimulationScenario base = defaults;
  base.subjects = values.take_size("subjects", defaults.subjects);
  if (const auto scheme = values.take("size_scheme")) {
    base.size_scheme = parse_group_size_scheme(*scheme);
  }
  base.size_spread = values.take_double("size_spread", defaults.size_spread);
  base.noise_sd = values.take_double("noise_sd", defaults.noise_sd);
  base.signal_group_fraction =
      values.take_double("signal_group_fraction", defaults.signal_group_fraction);
  base.within_prob = values.take_double("within_prob", defaults.within_prob);
  base.between_prob = values.take_double("between_prob", defaults.between_prob);
  base.rho.magnitude_min = values.take_double("rho_magnitude_min", defaults.rho.magnitude_min);
  base.rho.magnitude_max = values.take_double("rho_magnitude_max", defaults.rho.magnitude_max);
  base.rho.positive_prob = values.take_double("rho_positive_prob", defaults.rho.positive_prob);
  if (const auto scheme = values.take("coupling")) {
    base.coupling = parse_coupling_scheme(*scheme);
  }
  base.max_partners = values.take_size("max_partners", defaults.max_partners);
  base.component_cap = values.take_size("component_cap", defaults.component_cap);
  base.alpha = values.take_double("alpha", defaults.alpha);
  if (const auto variant = values.take("test_variant")) {
    base.test_variant = parse_test_variant(*variant);
  }
  if (const auto methods = values.take("methods")) {
    base.methods.clear();
    for (const std::string& name : split_fields(*methods, ',')) {
      base.methods.push_back(parse_method(name));
    }
  }
  base.replicates = values.take_size("replicates", defaults.replicates);

  const std::vector<std::size_t> groups = values.take_size_list("groups", defaults.groups);
  const std::vector<std::size_t> features =
      values.take_size_list("features", defaults.features);
  require(groups.size() == features.size(), ErrorKind::ParseError,
          path.string() + ": 'groups' and 'features' must list the same number of values");
  const std::vector<double> case_fractions =
      values.take_double_list("case_fraction", defaults.case_fraction);
  const std::vector<double> shifts =
      values.take_double_list("signal_shift", defaults.signal_shift);
  const std::vector<double> nonnull_fractions =
      values.take_double_list("nonnull_fraction", defaults.nonnull_fraction);
  const std::vector<double> coupling_probs =
      values.take_double_list("coupling_prob", defaults.coupling_prob);
  values.finish();

  // Grid order is pinned: sizes advance slowest, coupling fastest.
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (const double case_fraction : case_fractions) {
      for (const double shift : shifts) {
        for (const double nonnull : nonnull_fractions) {
          for (const double coupling : coupling_probs) {
            SimulationScenario scenario = base;
            scenario.groups = groups[i];
            scenario.features = features[i];
            scenario.case_fraction = case_fraction;
            scenario.signal_shift = shift;
            scenario.nonnull_fraction = nonnull;
            scenario.coupling_prob = coupling;
            scenario.validate();
            config.grid.push_back(std::move(scenario));
          }
        }
      }
    }
  }
  return config;
}

void write_study_outputs(const StudyResult& study, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);

  const std::filesystem::path summary_path = directory / "summary.tsv";
  std::ofstream summary = open_output(summary_path);
  summary << "scenario\tgroups\tfeatures\tsubjects\tcase_fraction\tsignal_shift"
             "\tnonnull_fraction\tcoupling_prob\tmethod\treplicates"
             "\trejections_mean\trejections_sd\tfdr_mean\tfdr_sd\ttpr_mean\ttpr_sd\n";
  for (std::size_t point = 0; point < study.reports.size(); ++point) {
    const ScenarioReport& report = study.reports[point];
    const SimulationScenario& scenario = report.scenario;
    for (const MethodSummary& method : report.methods) {
      summary << point << '\t' << scenario.groups << '\t' << scenario.features << '\t'
              << scenario.subjects << '\t' << format_number(scenario.case_fraction) << '\t'
              << format_number(scenario.signal_shift) << '\t'
              << format_number(scenario.nonnull_fraction) << '\t'
              << format_number(scenario.coupling_prob) << '\t' << method_name(method.method)
              << '\t' << method.replicates << '\t' << format_number(method.rejections.mean)
              << '\t' << format_number(method.rejections.sd) << '\t'
              << format_number(method.fdr.mean) << '\t' << format_number(method.fdr.sd)
              << '\t' << format_number(method.tpr.mean) << '\t'
              << format_number(method.tpr.sd) << '\n';
    }
  }
  finish_output(summary, summary_path);

  for (std::size_t point = 0; point < study.reports.size(); ++point) {
    char name[32];
    std::snprintf(name, sizeof name, "counts_%03zu.tsv", point);
    const std::filesystem::path counts_path = directory / name;
    std::ofstream counts = open_output(counts_path);
    counts << "replicate\tmethod\trejections\tfalse_rejections\ttrue_rejections\tnonnull\n";
    for (const ReplicateRecord& record : study.reports[point].replicates) {
      for (const MethodCounts& method : record.counts) {
        counts << record.replicate << '\t' << method_name(method.method) << '\t'
               << method.rejections << '\t' << method.false_rejections << '\t'
               << method.true_rejections << '\t' << record.nonnull_count << '\n';
      }
    }
    finish_output(counts, counts_path);
  }

  const std::filesystem::path table_path = directory / "table.txt";
  std::ofstream table = open_output(table_path);
  for (std::size_t point = 0; point < study.reports.size(); ++point) {
    const ScenarioReport& report = study.reports[point];
    const SimulationScenario& scenario = report.scenario;
    char line[256];
    std::snprintf(line, sizeof line,
                  "scenario %03zu  groups=%zu  features=%zu  subjects=%zu"
                  "  case_fraction=%s  signal_shift=%s  nonnull_fraction=%s"
                  "  coupling_prob=%s\n",
                  point, scenario.groups, scenario.features, scenario.subjects,
                  format_number(scenario.case_fraction).c_str(),
                  format_number(scenario.signal_shift).c_str(),
                  format_number(scenario.nonnull_fraction).c_str(),
                  format_number(scenario.coupling_prob).c_str());
    table << line;
    std::snprintf(line, sizeof line, "  %-11s %10s %10s %10s %10s %10s %10s\n", "method",
                  "R_mean", "R_sd", "FDR_mean", "FDR_sd", "TPR_mean", "TPR_sd");
    table << line;
    for (const MethodSummary& method : report.methods) {
      std::snprintf(line, sizeof line, "  %-11s %10s %10s %10s %10s %10s %10s\n",
                    method_name(method.method), format_number(method.rejections.mean).c_str(),
                    format_number(method.rejections.sd).c_str(),
                    format_number(method.fdr.mean).c_str(),
                    format_number(method.fdr.sd).c_str(),
                    format_number(method.tpr.mean).c_str(),
                    format_number(method.tpr.sd).c_str());
      table << line;
    }
    table << '\n';
  }
  finish_output(table, table_path);
}

std::filesystem::path resolve_output_path(const std::filesystem::path& path) {
  if (path.is_absolute()) return path;
  const char* root = std::getenv("CASTFDR_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0') return path;
  return std::filesystem::path(root) / path;
}

std::size_t env_thread_count(std::size_t fallback) {
  const char* value = std::getenv("CASTFDR_THREADS");
  if (value == nullptr || *value == '\0') return fallback;
  errno = 0;
  char* end = nullptr;
  const unsigned long threads = std::strtoul(value, &end, 10);
  if (end == value || *end != '\0' || errno == ERANGE || threads == 0) {
    throw Error(ErrorKind::ParseError, "CASTFDR_THREADS must be a positive integer");
  }
  return static_cast<std::size_t>(threads);
}

}  // namespace cast
