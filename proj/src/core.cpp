#include "castfdr/core.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace cast {

bool method_uses_groups(Method method) {
  switch (method) {
    case Method::GBH:
    case Method::GBY:
    case Method::LCAST:
    case Method::QCAST:
      return true;
    default:
      return false;
  }
}

bool method_uses_correlations(Method method) {
  return method == Method::LCAST || method == Method::QCAST;
}

const char* method_name(Method method) {
  switch (method) {
    case Method::Bonferroni: return "bonferroni";
    case Method::BH: return "bh";
    case Method::BY: return "by";
    case Method::GBH: return "gbh";
    case Method::GBY: return "gby";
    case Method::LCAST: return "lcast";
    case Method::QCAST: return "qcast";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "bonferroni") return Method::Bonferroni;
  if (lower == "bh") return Method::BH;
  if (lower == "by") return Method::BY;
  if (lower == "gbh") return Method::GBH;
  if (lower == "gby") return Method::GBY;
  if (lower == "lcast") return Method::LCAST;
  if (lower == "qcast") return Method::QCAST;
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

std::string Violation::describe() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::EmptyInput:
      out << "input contains no records";
      break;
    case Kind::EmptyIdentifier:
      out << "record with empty feature or group identifier";
      break;
    case Kind::DuplicateFeature:
      out << "feature '" << feature << "' appears more than once";
      break;
    case Kind::PValueOutOfRange:
      out << "feature '" << feature << "' has p-value " << value
          << " outside [0, 1]";
      break;
  }
  return out.str();
}

std::vector<Violation> GroupedPValueSet::find_violations(const std::vector<PValueEntry>& entries) {
  std::vector<Violation> violations;
  if (entries.empty()) {
    violations.push_back({Violation::Kind::EmptyInput, "", 0.0});
    return violations;
  }
  std::unordered_set<std::string> seen;
  seen.reserve(entries.size());
  for (const PValueEntry& entry : entries) {
    if (entry.feature.empty() || entry.group.empty()) {
      violations.push_back({Violation::Kind::EmptyIdentifier, entry.feature, entry.pvalue});
      continue;
    }
    if (!seen.insert(entry.feature).second) {
      violations.push_back({Violation::Kind::DuplicateFeature, entry.feature, entry.pvalue});
    }
    // NaN fails both comparisons and lands here as well.
    if (!(entry.pvalue >= 0.0 && entry.pvalue <= 1.0)) {
      violations.push_back({Violation::Kind::PValueOutOfRange, entry.feature, entry.pvalue});
    }
  }
  return violations;
}

GroupedPValueSet GroupedPValueSet::validate(std::vector<PValueEntry> entries) {
  std::vector<Violation> violations = find_violations(entries);
  if (!violations.empty()) {
    ErrorKind kind = ErrorKind::InvalidArgument;
    switch (violations.front().kind) {
      case Violation::Kind::EmptyInput: kind = ErrorKind::EmptyInput; break;
      case Violation::Kind::EmptyIdentifier: kind = ErrorKind::EmptyIdentifier; break;
      case Violation::Kind::DuplicateFeature: kind = ErrorKind::DuplicateFeature; break;
      case Violation::Kind::PValueOutOfRange: kind = ErrorKind::PValueOutOfRange; break;
    }
    throw Error(kind, violations.front().describe());
  }

  std::sort(entries.begin(), entries.end(),
            [](const PValueEntry& a, const PValueEntry& b) {
              if (a.group != b.group) return a.group < b.group;
              return a.feature < b.feature;
            });

  GroupedPValueSet set;
  set.entries_ = std::move(entries);
  set.offsets_.push_back(0);
  for (std::size_t i = 0; i < set.entries_.size(); ++i) {
    if (set.groups_.empty() || set.groups_.back() != set.entries_[i].group) {
      if (!set.groups_.empty()) set.offsets_.push_back(i);
      set.groups_.push_back(set.entries_[i].group);
    }
  }
  set.offsets_.push_back(set.entries_.size());
  return set;
}

std::size_t GroupedPValueSet::group_size(std::size_t group_index) const {
  return offsets_[group_index + 1] - offsets_[group_index];
}

std::span<const PValueEntry> GroupedPValueSet::group_entries(std::size_t group_index) const {
  return {entries_.data() + offsets_[group_index],
          offsets_[group_index + 1] - offsets_[group_index]};
}

std::optional<std::size_t> GroupedPValueSet::group_index(const GroupId& group) const {
  auto it = std::lower_bound(groups_.begin(), groups_.end(), group);
  if (it == groups_.end() || *it != group) return std::nullopt;
  return static_cast<std::size_t>(it - groups_.begin());
}

}  // namespace cast
