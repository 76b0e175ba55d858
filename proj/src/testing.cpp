#include "castfdr/testing.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cast {

TestVariant parse_test_variant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "pooled") return TestVariant::Pooled;
  if (lower == "welch") return TestVariant::Welch;
  throw Error(ErrorKind::InvalidArgument, "unknown test variant '" + std::string(name) + "'");
}

const char* test_variant_name(TestVariant variant) {
  return variant == TestVariant::Pooled ? "pooled" : "welch";
}

PhenotypeVector PhenotypeVector::from_labels(std::vector<std::uint8_t> is_case) {
  PhenotypeVector phenotype;
  phenotype.cases_ = 0;
  for (std::uint8_t label : is_case) {
    if (label > 1) {
      throw Error(ErrorKind::InvalidArgument, "phenotype labels must be 0 or 1");
    }
    phenotype.cases_ += label;
  }
  const std::size_t controls = is_case.size() - phenotype.cases_;
  if (phenotype.cases_ < 2 || controls < 2) {
    throw Error(ErrorKind::InvalidArgument,
                "each phenotype class needs at least two subjects (got " +
                    std::to_string(phenotype.cases_) + " cases, " +
                    std::to_string(controls) + " controls)");
  }
  phenotype.labels_ = std::move(is_case);
  return phenotype;
}

namespace detail {

namespace {

// Continued fraction for the incomplete beta, modified Lentz iteration.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 500;
  constexpr double kEpsilon = 1e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEpsilon) return h;
  }
  return h;  // converged to working precision for all df and x we see
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "beta parameters must be positive");
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "beta argument must lie in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  // Use the expansion on the side where it converges fast, mirror otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "degrees of freedom must be positive");
  }
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  double p = regularized_incomplete_beta(df / 2.0, 0.5, x);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace detail

namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // sample variance, n - 1 in the denominator
  std::size_t n = 0;
};

Moments moments(std::span<const double> values) {
  Moments m;
  m.n = values.size();
  // A constant sample must come out with exactly zero variance, so detect it
  // before the mean picks up rounding noise.
  if (std::all_of(values.begin(), values.end(),
                  [&](double v) { return v == values.front(); })) {
    m.mean = values.front();
    m.variance = 0.0;
    return m;
  }
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(m.n);
  for (double v : values) m.variance += (v - m.mean) * (v - m.mean);
  m.variance /= static_cast<double>(m.n - 1);
  return m;
}

}  // namespace

double two_sample_pvalue(std::span<const double> case_values,
                         std::span<const double> control_values,
                         TestVariant variant, bool* degenerate) {
  if (degenerate != nullptr) *degenerate = false;
  if (case_values.size() < 2 || control_values.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "each sample needs at least two observations");
  }

  const Moments a = moments(case_values);
  const Moments b = moments(control_values);
  if (a.variance == 0.0 && b.variance == 0.0) {
    if (degenerate != nullptr) *degenerate = true;
    return a.mean == b.mean ? 1.0 : 0.0;
  }

  const double n1 = static_cast<double>(a.n);
  const double n2 = static_cast<double>(b.n);
  double t = 0.0;
  double df = 0.0;
  if (variant == TestVariant::Pooled) {
    df = n1 + n2 - 2.0;
    const double pooled = ((n1 - 1.0) * a.variance + (n2 - 1.0) * b.variance) / df;
    t = (a.mean - b.mean) / std::sqrt(pooled * (1.0 / n1 + 1.0 / n2));
  } else {
    const double va = a.variance / n1;
    const double vb = b.variance / n2;
    t = (a.mean - b.mean) / std::sqrt(va + vb);
    df = (va + vb) * (va + vb) / (va * va / (n1 - 1.0) + vb * vb / (n2 - 1.0));
  }
  return detail::student_t_two_sided(t, df);
}

MatrixPValues matrix_pvalues(const DataMatrix& matrix, const PhenotypeVector& phenotype,
                             TestVariant variant) {
  if (matrix.subjects != phenotype.size()) {
    throw Error(ErrorKind::SubjectMismatch,
                "matrix has " + std::to_string(matrix.subjects) + " subjects but phenotype has " +
                    std::to_string(phenotype.size()));
  }
  if (matrix.features.empty()) {
    throw Error(ErrorKind::EmptyInput, "data matrix has no features");
  }

  std::vector<double> case_values(phenotype.cases());
  std::vector<double> control_values(phenotype.controls());
  MatrixPValues result;
  result.pvalues.resize(matrix.features.size());
  for (std::size_t i = 0; i < matrix.features.size(); ++i) {
    const std::span<const double> row = matrix.row(i);
    std::size_t nc = 0;
    std::size_t nk = 0;
    for (std::size_t s = 0; s < row.size(); ++s) {
      if (phenotype.is_case(s)) {
        case_values[nc++] = row[s];
      } else {
        control_values[nk++] = row[s];
      }
    }
    bool degenerate = false;
    result.pvalues[i] = two_sample_pvalue(case_values, control_values, variant, &degenerate);
    if (degenerate) result.degenerate_rows.push_back(i);
  }
  return result;
}

}  // namespace cast
