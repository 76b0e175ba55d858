#include "castfdr/testing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

using cast::DataMatrix;
using cast::Error;
using cast::ErrorKind;
using cast::PhenotypeVector;
using cast::TestVariant;

namespace {

const std::vector<double> kCaseSample = {2.1, 2.9, 3.0, 2.5};
const std::vector<double> kControlSample = {1.0, 1.2, 0.8, 1.1};

}  // namespace

TEST_CASE("two-sided tail probabilities match the reference grid") {
  for (const auto& [t, df, expected] : oracle::kStudentGrid) {
    const double p = cast::detail::student_t_two_sided(t, df);
    CHECK(p == doctest::Approx(expected).epsilon(1e-10));
    CHECK(cast::detail::student_t_two_sided(-t, df) == p);
  }
  CHECK(cast::detail::student_t_two_sided(0.0, 5.0) == 1.0);
}

TEST_CASE("regularized incomplete beta basics") {
  CHECK(cast::detail::regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(cast::detail::regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  // I_x(1, 1) is the identity.
  for (double x : {0.1, 0.25, 0.5, 0.9}) {
    CHECK(cast::detail::regularized_incomplete_beta(1.0, 1.0, x) ==
          doctest::Approx(x).epsilon(1e-12));
  }
  // Symmetry I_x(a, b) = 1 - I_{1-x}(b, a).
  CHECK(cast::detail::regularized_incomplete_beta(2.5, 4.0, 0.3) ==
        doctest::Approx(1.0 - cast::detail::regularized_incomplete_beta(4.0, 2.5, 0.7))
            .epsilon(1e-12));
}

TEST_CASE("pooled and unequal-variance p-values match the frozen example") {
  CHECK(cast::two_sample_pvalue(kCaseSample, kControlSample, TestVariant::Pooled) ==
        doctest::Approx(oracle::kPooledExampleP).epsilon(1e-10));
  CHECK(cast::two_sample_pvalue(kCaseSample, kControlSample, TestVariant::Welch) ==
        doctest::Approx(oracle::kWelchExampleP).epsilon(1e-10));
}

TEST_CASE("the test is symmetric in sign and invariant to sample order") {
  std::vector<double> negated_case(kCaseSample);
  std::vector<double> negated_control(kControlSample);
  for (double& v : negated_case) v = -v;
  for (double& v : negated_control) v = -v;
  for (TestVariant variant : {TestVariant::Pooled, TestVariant::Welch}) {
    const double forward = cast::two_sample_pvalue(kCaseSample, kControlSample, variant);
    CHECK(cast::two_sample_pvalue(kControlSample, kCaseSample, variant) ==
          doctest::Approx(forward).epsilon(1e-14));
    CHECK(cast::two_sample_pvalue(negated_case, negated_control, variant) ==
          doctest::Approx(forward).epsilon(1e-14));

    std::vector<double> shuffled(kCaseSample);
    std::swap(shuffled[0], shuffled[3]);
    CHECK(cast::two_sample_pvalue(shuffled, kControlSample, variant) ==
          doctest::Approx(forward).epsilon(1e-14));
  }
}

TEST_CASE("identical groups give a p-value of one") {
  const std::vector<double> values = {1.0, 2.0, 3.0};
  for (TestVariant variant : {TestVariant::Pooled, TestVariant::Welch}) {
    CHECK(cast::two_sample_pvalue(values, values, variant) == doctest::Approx(1.0));
  }
}

TEST_CASE("constant samples follow the degenerate convention") {
  const std::vector<double> flat_a = {2.0, 2.0, 2.0};
  const std::vector<double> flat_b = {5.0, 5.0};
  bool degenerate = false;
  CHECK(cast::two_sample_pvalue(flat_a, flat_a, TestVariant::Pooled, &degenerate) == 1.0);
  CHECK(degenerate);
  degenerate = false;
  CHECK(cast::two_sample_pvalue(flat_a, flat_b, TestVariant::Welch, &degenerate) == 0.0);
  CHECK(degenerate);
  // One constant sample still leaves a usable statistic.
  degenerate = true;
  const double p =
      cast::two_sample_pvalue(flat_a, kControlSample, TestVariant::Pooled, &degenerate);
  CHECK(!degenerate);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
}

TEST_CASE("constant detection survives values whose mean is inexact") {
  // 0.1 + 0.2 style noise: all entries identical, so the sample must be
  // treated as constant no matter what the computed variance would round to.
  const std::vector<double> tricky(6, 0.1 + 0.2);
  bool degenerate = false;
  CHECK(cast::two_sample_pvalue(tricky, tricky, TestVariant::Welch, &degenerate) == 1.0);
  CHECK(degenerate);
}

TEST_CASE("each sample needs two observations") {
  const std::vector<double> one = {1.0};
  const std::vector<double> two = {1.0, 2.0};
  CHECK_THROWS_AS((void)cast::two_sample_pvalue(one, two, TestVariant::Pooled), Error);
  CHECK_THROWS_AS((void)cast::two_sample_pvalue(two, one, TestVariant::Welch), Error);
  try {
    (void)cast::two_sample_pvalue(std::vector<double>{}, two, TestVariant::Pooled);
    FAIL("expected a size-contract error");
  } catch (const Error& error) {
    CHECK(error.kind() == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("p-values are uniform under the null") {
  // Large-ish normal samples: the empirical distribution of the p-value
  // should be close to uniform; check mean and a few quantiles loosely.
  std::mt19937_64 gen(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int trials = 2000;
  std::vector<double> pvalues;
  pvalues.reserve(trials);
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> a(15);
    std::vector<double> b(15);
    for (double& v : a) v = normal(gen);
    for (double& v : b) v = normal(gen);
    pvalues.push_back(cast::two_sample_pvalue(a, b, TestVariant::Pooled));
  }
  const double mean =
      std::accumulate(pvalues.begin(), pvalues.end(), 0.0) / pvalues.size();
  CHECK(mean == doctest::Approx(0.5).epsilon(0.05));
  std::sort(pvalues.begin(), pvalues.end());
  CHECK(oracle::ks_uniform(pvalues) < 0.05);
}

TEST_CASE("welch and pooled agree when variances and sizes match in expectation") {
  // With equal sample sizes the two statistics coincide; only the degrees of
  // freedom differ, and for equal variances they are close.
  std::mt19937_64 gen(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> a(40);
  std::vector<double> b(40);
  for (double& v : a) v = normal(gen);
  for (double& v : b) v = normal(gen) + 0.4;
  const double pooled = cast::two_sample_pvalue(a, b, TestVariant::Pooled);
  const double welch = cast::two_sample_pvalue(a, b, TestVariant::Welch);
  CHECK(welch == doctest::Approx(pooled).epsilon(0.05));
  CHECK(welch >= pooled);  // Satterthwaite never exceeds n1 + n2 - 2 degrees
}

TEST_CASE("matrix p-values follow the phenotype split row by row") {
  DataMatrix matrix;
  matrix.features = {"f1", "f2", "f3"};
  matrix.subjects = 8;
  matrix.values = {
      // cases occupy the odd positions below
      2.1, 1.0, 2.9, 1.2, 3.0, 0.8, 2.5, 1.1,
      1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0,
      7.0, 7.0, 7.0, 7.0, 7.0, 7.0, 7.0, 7.0,
  };
  const PhenotypeVector phenotype =
      PhenotypeVector::from_labels({1, 0, 1, 0, 1, 0, 1, 0});
  const cast::MatrixPValues result =
      cast::matrix_pvalues(matrix, phenotype, TestVariant::Pooled);
  REQUIRE(result.pvalues.size() == 3);
  CHECK(result.pvalues[0] == doctest::Approx(oracle::kPooledExampleP).epsilon(1e-10));
  CHECK(result.pvalues[1] == doctest::Approx(1.0));  // identical class values
  CHECK(result.pvalues[2] == 1.0);                    // constant row, equal constants
  REQUIRE(result.degenerate_rows.size() == 1);
  CHECK(result.degenerate_rows[0] == 2);
}

TEST_CASE("matrix and phenotype sizes must agree") {
  DataMatrix matrix;
  matrix.features = {"f1"};
  matrix.subjects = 4;
  matrix.values = {1.0, 2.0, 3.0, 4.0};
  const PhenotypeVector phenotype = PhenotypeVector::from_labels({1, 1, 0, 0, 1, 0});
  try {
    (void)cast::matrix_pvalues(matrix, phenotype, TestVariant::Pooled);
    FAIL("expected a subject-mismatch error");
  } catch (const Error& error) {
    CHECK(error.kind() == ErrorKind::SubjectMismatch);
  }
}

TEST_CASE("phenotypes require two subjects per class") {
  CHECK_THROWS_AS((void)PhenotypeVector::from_labels({1, 1, 1, 0}), Error);
  CHECK_THROWS_AS((void)PhenotypeVector::from_labels({0, 0, 0, 0}), Error);
  CHECK_THROWS_AS((void)PhenotypeVector::from_labels({}), Error);
  const PhenotypeVector ok = PhenotypeVector::from_labels({1, 0, 1, 0});
  CHECK(ok.cases() == 2);
  CHECK(ok.controls() == 2);
  CHECK(ok.is_case(0));
  CHECK(!ok.is_case(1));
}

TEST_CASE("variant names round-trip") {
  CHECK(cast::parse_test_variant("pooled") == TestVariant::Pooled);
  CHECK(cast::parse_test_variant("welch") == TestVariant::Welch);
  CHECK(cast::test_variant_name(TestVariant::Pooled) == std::string("pooled"));
  CHECK(cast::test_variant_name(TestVariant::Welch) == std::string("welch"));
  CHECK_THROWS_AS((void)cast::parse_test_variant("students"), Error);
}
