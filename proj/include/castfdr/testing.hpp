#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "castfdr/core.hpp"

namespace cast {

enum class TestVariant {
  Pooled,  // equal-variance statistic, n1 + n2 - 2 degrees of freedom
  Welch,   // unequal-variance statistic, Satterthwaite degrees of freedom
};

TestVariant parse_test_variant(std::string_view name);
const char* test_variant_name(TestVariant variant);

// Case/control assignment for the columns of a data matrix. Both classes
// must appear at least twice.
class PhenotypeVector {
 public:
  static PhenotypeVector from_labels(std::vector<std::uint8_t> is_case);

  std::size_t size() const { return labels_.size(); }
  std::size_t cases() const { return cases_; }
  std::size_t controls() const { return labels_.size() - cases_; }
  bool is_case(std::size_t subject) const { return labels_[subject] != 0; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }

 private:
  std::vector<std::uint8_t> labels_;
  std::size_t cases_ = 0;
};

// Feature-by-subject values, row major.
struct DataMatrix {
  std::vector<FeatureId> features;
  std::size_t subjects = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t feature) const {
    return {values.data() + feature * subjects, subjects};
  }
  std::span<double> row(std::size_t feature) {
    return {values.data() + feature * subjects, subjects};
  }
};

// Two-sided two-sample t-test p-value. Each sample needs at least two
// observations. When both samples are constant the statistic is undefined:
// equal constants give p = 1, different constants give p = 0; either way
// *degenerate is set when provided.
double two_sample_pvalue(std::span<const double> case_values,
                         std::span<const double> control_values,
                         TestVariant variant, bool* degenerate = nullptr);

struct MatrixPValues {
  std::vector<double> pvalues;             // one per feature, in row order
  std::vector<std::size_t> degenerate_rows;
};

MatrixPValues matrix_pvalues(const DataMatrix& matrix, const PhenotypeVector& phenotype,
                             TestVariant variant);

namespace detail {

// Regularized incomplete beta function I_x(a, b) via the Lentz continued
// fraction, accurate to better than 1e-10 over the range the t-test needs.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

}  // namespace detail

}  // namespace cast
