#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "castfdr/error.hpp"

namespace cast {

using FeatureId = std::string;
using GroupId = std::string;

enum class Method { Bonferroni, BH, BY, GBH, GBY, LCAST, QCAST };

// Grouped methods apply the step-up rule within each annotation group; the
// pooled ones ignore the grouping and rank all features together.
bool method_uses_groups(Method method);
// Only the correlation-adjusted pair consumes mean row correlations.
bool method_uses_correlations(Method method);
const char* method_name(Method method);
// Accepts the lowercase names used on the command line ("bh", "lcast", ...).
Method parse_method(std::string_view name);

struct PValueEntry {
  FeatureId feature;
  GroupId group;
  double pvalue = 0.0;
};

struct Violation {
  enum class Kind { EmptyInput, EmptyIdentifier, DuplicateFeature, PValueOutOfRange };
  Kind kind = Kind::EmptyInput;
  FeatureId feature;  // offending record, empty for whole-input problems
  double value = 0.0;

  std::string describe() const;
};

// Validated collection of per-feature p-values partitioned into groups.
// Entries are held in a canonical order (groups lexicographic, features
// lexicographic within a group) so that any permutation of the same records
// produces an identical set.
class GroupedPValueSet {
 public:
  // Returns every problem found instead of stopping at the first one.
  static std::vector<Violation> find_violations(const std::vector<PValueEntry>& entries);
  // Throws Error describing the first violation; otherwise builds the set.
  static GroupedPValueSet validate(std::vector<PValueEntry> entries);

  std::size_t total_features() const { return entries_.size(); }  // M
  std::size_t group_count() const { return groups_.size(); }      // G

  const std::vector<PValueEntry>& entries() const { return entries_; }
  const std::vector<GroupId>& groups() const { return groups_; }

  std::size_t group_size(std::size_t group_index) const;  // M_g
  std::span<const PValueEntry> group_entries(std::size_t group_index) const;
  std::optional<std::size_t> group_index(const GroupId& group) const;

 private:
  GroupedPValueSet() = default;

  std::vector<PValueEntry> entries_;   // canonical order, contiguous per group
  std::vector<GroupId> groups_;        // lexicographic
  std::vector<std::size_t> offsets_;   // group g occupies [offsets_[g], offsets_[g+1])
};

}  // namespace cast
