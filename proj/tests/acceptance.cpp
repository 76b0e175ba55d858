#include <sys/resource.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "castfdr/core.hpp"
#include "castfdr/correlation.hpp"
#include "castfdr/evaluation.hpp"
#include "castfdr/io.hpp"
#include "castfdr/procedures.hpp"
#include "castfdr/rng.hpp"
#include "castfdr/simulation.hpp"
#include "oracles.hpp"

// End-to-end behavioural gate. Each criterion prints its observations and one
// PASS/FAIL verdict line; the process exits with the number of failures.
// Run with no arguments for the full battery or with criterion numbers to
// select a subset.

namespace {

constexpr std::uint64_t kMasterSeed = 20240817;

struct Report {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    notes.push_back(std::string(ok ? "  ok   " : "  FAIL ") + what);
    pass = pass && ok;
  }

  void info(const std::string& what) { notes.push_back("       " + what); }
};

std::string num(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6g", value);
  return buffer;
}

const cast::MethodSummary& summary_for(const cast::ScenarioReport& report,
                                       cast::Method method) {
  for (const cast::MethodSummary& summary : report.methods) {
    if (summary.method == method) return summary;
  }
  throw std::runtime_error("method missing from the study report");
}

// Criterion 1: dense coupled design. The correlation-adjusted procedures hold
// the error rate with near-total power while the grouped baselines overshoot.
Report criterion1() {
  Report r;
  cast::SimulationScenario s;  // defaults are the coupled base design
  s.replicates = 100;
  const cast::StudyResult study = cast::run_study({s}, kMasterSeed, 1);
  const cast::ScenarioReport& report = study.reports.at(0);
  const auto& lcast = summary_for(report, cast::Method::LCAST);
  const auto& qcast = summary_for(report, cast::Method::QCAST);
  const auto& gbh = summary_for(report, cast::Method::GBH);
  const auto& gby = summary_for(report, cast::Method::GBY);
  r.check(lcast.fdr.mean <= 0.05, "fdr(lcast) = " + num(lcast.fdr.mean) + " <= 0.05");
  r.check(qcast.fdr.mean <= 0.05, "fdr(qcast) = " + num(qcast.fdr.mean) + " <= 0.05");
  r.check(lcast.tpr.mean >= 0.95, "tpr(lcast) = " + num(lcast.tpr.mean) + " >= 0.95");
  r.check(qcast.tpr.mean >= 0.95, "tpr(qcast) = " + num(qcast.tpr.mean) + " >= 0.95");
  r.check(gbh.fdr.mean >= 0.15, "fdr(gbh) = " + num(gbh.fdr.mean) + " >= 0.15");
  r.check(gby.fdr.mean >= 0.08, "fdr(gby) = " + num(gby.fdr.mean) + " >= 0.08");
  return r;
}

// Criterion 2: same design without group coupling.
Report criterion2() {
  Report r;
  cast::SimulationScenario s;
  s.coupling_prob = 0.0;
  s.replicates = 100;
  const cast::StudyResult study = cast::run_study({s}, kMasterSeed, 1);
  const cast::ScenarioReport& report = study.reports.at(0);
  const auto& lcast = summary_for(report, cast::Method::LCAST);
  const auto& qcast = summary_for(report, cast::Method::QCAST);
  const auto& gbh = summary_for(report, cast::Method::GBH);
  const auto& gby = summary_for(report, cast::Method::GBY);
  r.check(lcast.fdr.mean <= 0.05, "fdr(lcast) = " + num(lcast.fdr.mean) + " <= 0.05");
  r.check(qcast.fdr.mean <= 0.05, "fdr(qcast) = " + num(qcast.fdr.mean) + " <= 0.05");
  r.check(gbh.fdr.mean >= 0.15, "fdr(gbh) = " + num(gbh.fdr.mean) + " >= 0.15");
  r.check(gby.fdr.mean >= 0.07, "fdr(gby) = " + num(gby.fdr.mean) + " >= 0.07");
  r.check(lcast.tpr.mean >= 0.95, "tpr(lcast) = " + num(lcast.tpr.mean) + " >= 0.95");
  r.check(qcast.tpr.mean >= 0.95, "tpr(qcast) = " + num(qcast.tpr.mean) + " >= 0.95");
  r.check(lcast.rejections.mean >= 11.0 && lcast.rejections.mean <= 13.0,
          "mean rejections(lcast) = " + num(lcast.rejections.mean) + " in [11, 13]");
  return r;
}

// Criterion 3: weak signal and thin case arm. The linear correction keeps
// more power than the quadratic one, both within the error budget.
Report criterion3() {
  Report r;
  cast::SimulationScenario s;
  s.signal_shift = 0.7;
  s.case_fraction = 0.25;
  s.methods = {cast::Method::LCAST, cast::Method::QCAST};
  s.replicates = 100;
  const cast::StudyResult study = cast::run_study({s}, kMasterSeed, 1);
  const cast::ScenarioReport& report = study.reports.at(0);
  const auto& lcast = summary_for(report, cast::Method::LCAST);
  const auto& qcast = summary_for(report, cast::Method::QCAST);
  r.check(lcast.tpr.mean > qcast.tpr.mean,
          "tpr(lcast) = " + num(lcast.tpr.mean) + " > tpr(qcast) = " +
              num(qcast.tpr.mean));
  r.check(lcast.fdr.mean <= 0.05, "fdr(lcast) = " + num(lcast.fdr.mean) + " <= 0.05");
  r.check(qcast.fdr.mean <= 0.05, "fdr(qcast) = " + num(qcast.fdr.mean) + " <= 0.05");
  return r;
}

// Criterion 4: a single group with zero mean correlations reduces the linear
// procedure to the reciprocal-rank one, feature for feature.
Report criterion4() {
  Report r;
  const double alphas[] = {0.01, 0.05, 0.1, 0.2};
  cast::Rng rng(404);
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(60);
    std::vector<cast::PValueEntry> entries;
    cast::MeanRowCorrelations means;
    means.group = "g";
    for (std::size_t i = 0; i < m; ++i) {
      double p = rng.uniform();
      if (rng.bernoulli(0.2)) p = std::floor(p * 100.0) / 100.0;  // force ties
      const cast::FeatureId feature = cast::feature_label(i, m);
      entries.push_back({feature, "g", p});
      means.order.push_back(feature);
      means.values.push_back(0.0);
    }
    const cast::GroupedPValueSet set = cast::GroupedPValueSet::validate(std::move(entries));
    cast::MeanCorrelationSet correlations;
    correlations.emplace("g", means);
    const double alpha = alphas[trial % 4];
    const cast::AdjustmentResult linear =
        cast::run_adjustment(set, &correlations, cast::Method::LCAST, alpha);
    const cast::AdjustmentResult pooled =
        cast::run_adjustment(set, nullptr, cast::Method::BY, alpha);
    if (linear.rejections != pooled.rejections) ++mismatches;
    for (std::size_t i = 0; i < m; ++i) {
      const cast::FeatureResult& a = linear.features[i];
      const cast::FeatureResult& b = pooled.features[i];
      const double diff = std::abs(a.adjusted - b.adjusted);
      worst = std::max(worst, diff);
      if (a.feature != b.feature || a.rank != b.rank || diff > 1e-12 ||
          a.rejected != b.rejected) {
        ++mismatches;
      }
    }
  }
  r.check(mismatches == 0, "200 random vectors, 4 alpha levels: " +
                               std::to_string(mismatches) + " mismatches");
  r.check(worst <= 1e-12, "largest adjusted difference = " + num(worst) + " <= 1e-12");
  return r;
}

// Criterion 5: all-singleton grouping collapses the correlation-adjusted
// procedures to the one-over-count rule and the grouped baselines to the raw
// level.
Report criterion5() {
  Report r;
  const double alphas[] = {0.01, 0.05, 0.1, 0.2};
  cast::Rng rng(505);
  std::size_t bad_cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 3 + rng.below(58);
    const double alpha = alphas[trial % 4];
    std::vector<cast::PValueEntry> entries;
    std::vector<double> pvalues;
    for (std::size_t i = 0; i < m; ++i) {
      double p = rng.uniform();
      if (rng.bernoulli(0.05)) p = alpha;  // sit exactly on the raw level
      entries.push_back({cast::feature_label(i, m), cast::group_label(i, m), p});
      pvalues.push_back(p);
    }
    const cast::GroupedPValueSet set = cast::GroupedPValueSet::validate(std::move(entries));
    bool ok = true;
    for (const cast::Method method :
         {cast::Method::LCAST, cast::Method::QCAST, cast::Method::GBH, cast::Method::GBY}) {
      const bool scaled =
          method == cast::Method::LCAST || method == cast::Method::QCAST;
      const double cut = scaled ? alpha / static_cast<double>(m) : alpha;
      const cast::AdjustmentResult result =
          cast::run_adjustment(set, nullptr, method, alpha);
      std::map<cast::FeatureId, bool> rejected;
      for (const cast::FeatureResult& feature : result.features) {
        rejected.emplace(feature.feature, feature.rejected);
      }
      for (std::size_t i = 0; i < m; ++i) {
        if (rejected.at(cast::feature_label(i, m)) != (pvalues[i] <= cut)) ok = false;
      }
    }
    if (!ok) ++bad_cases;
  }
  r.check(bad_cases == 0,
          "1000 singleton cases: " + std::to_string(bad_cases) + " rejection-set mismatches");
  return r;
}

// Criterion 6: factor identities and monotonicity.
Report criterion6() {
  Report r;
  bool exact = true;
  double worst_gap = 0.0;
  bool monotone = true;
  const double grid[] = {-0.99, -0.5, 0.0, 0.5, 0.99};
  for (std::size_t size = 1; size <= 50; ++size) {
    const std::vector<double> zeros(size, 0.0);
    if (cast::lcast_factor(zeros) != cast::harmonic_factor(size)) exact = false;
    if (size >= 5) {
      const double approx = std::log(static_cast<double>(size)) +
                            1.0 / (2.0 * static_cast<double>(size)) + 0.5772156649;
      worst_gap = std::max(worst_gap, std::abs(cast::harmonic_factor(size) - approx));
    }
    double previous_linear = -1.0;
    std::vector<double> previous_quadratic(size, -1.0);
    for (const double rbar : grid) {
      const std::vector<double> constant(size, rbar);
      const double linear = cast::lcast_factor(constant);
      if (linear < previous_linear) monotone = false;
      previous_linear = linear;
      for (std::size_t rank = 1; rank <= size; ++rank) {
        const double quadratic = cast::qcast_factor(size, rank, rbar);
        if (quadratic < previous_quadratic[rank - 1]) monotone = false;
        previous_quadratic[rank - 1] = quadratic;
      }
    }
  }
  r.check(exact, "linear factor at zero correlation equals the reciprocal-rank sum "
                 "exactly for sizes 1..50");
  r.check(worst_gap <= 0.05,
          "reciprocal-rank sum vs log approximation: largest gap = " + num(worst_gap) +
              " <= 0.05 for sizes >= 5");
  r.check(monotone,
          "both factors non-decreasing in the constant correlation over the grid");
  return r;
}

// Criterion 7: the step-up scan against an exhaustive reference, and the
// adjusted-value duality over an alpha grid.
Report criterion7() {
  Report r;
  cast::Rng rng(707);
  const double alphas[] = {0.01, 0.05, 0.1, 0.2};
  std::size_t scan_misses = 0;
  std::size_t duality_misses = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t m = 1 + rng.below(12);
    std::vector<double> pvalues(m);
    for (double& p : pvalues) p = rng.uniform();
    std::sort(pvalues.begin(), pvalues.end());

    std::vector<double> thresholds(m);
    for (double& t : thresholds) t = rng.uniform(0.0, 0.15);
    if (cast::step_up(pvalues, thresholds) !=
        oracle::brute_force_step_up(pvalues, thresholds)) {
      ++scan_misses;
    }

    std::vector<double> scales(m);
    for (double& s : scales) s = rng.uniform(0.05, 2.0);
    const std::vector<double> adjusted = cast::adjusted_pvalues(pvalues, scales);
    for (const double alpha : alphas) {
      std::vector<double> level(m);
      for (std::size_t j = 0; j < m; ++j) level[j] = alpha * scales[j];
      const std::size_t kept = cast::step_up(pvalues, level);
      if (kept != oracle::brute_force_step_up(pvalues, level)) ++scan_misses;
      for (std::size_t j = 0; j < m; ++j) {
        if ((adjusted[j] <= alpha) != (j < kept)) ++duality_misses;
      }
    }
  }
  r.check(scan_misses == 0,
          "10000 instances: " + std::to_string(scan_misses) + " scan disagreements");
  r.check(duality_misses == 0,
          "adjusted-value duality over 4 alpha levels: " +
              std::to_string(duality_misses) + " rank disagreements");
  return r;
}

// Criterion 8: the all-null design stays quiet and its per-feature p-values
// look uniform.
Report criterion8() {
  Report r;
  cast::SimulationScenario s;
  s.signal_shift = 0.0;
  s.nonnull_fraction = 0.0;
  s.methods = {cast::Method::LCAST, cast::Method::QCAST};
  s.replicates = 200;
  std::size_t linear_any = 0;
  std::size_t quadratic_any = 0;
  std::vector<double> pooled;
  pooled.reserve(s.replicates * s.features);
  for (std::size_t rep = 0; rep < s.replicates; ++rep) {
    const cast::ReplicateResult result =
        cast::run_replicate(s, cast::derive_seed(kMasterSeed, 0, rep), true);
    if (result.counts.at(0).rejections > 0) ++linear_any;
    if (result.counts.at(1).rejections > 0) ++quadratic_any;
    pooled.insert(pooled.end(), result.pvalues.begin(), result.pvalues.end());
  }
  const double linear_rate = static_cast<double>(linear_any) / 200.0;
  const double quadratic_rate = static_cast<double>(quadratic_any) / 200.0;
  const double ks = oracle::ks_uniform(pooled);
  r.check(linear_rate <= 0.10,
          "Pr(any lcast rejection) = " + num(linear_rate) + " <= 0.10");
  r.check(quadratic_rate <= 0.10,
          "Pr(any qcast rejection) = " + num(quadratic_rate) + " <= 0.10");
  r.check(ks < 0.05, "pooled p-value KS statistic = " + num(ks) + " < 0.05");
  return r;
}

// Criterion 9: threshold-curve ordering at group size 30 with the null
// proportion and the budget split pinned to one.
Report criterion9() {
  Report r;
  const std::size_t size = 30;
  const std::vector<double> rbars = {-0.9, 0.0, 0.9};
  const std::vector<cast::Method> methods = {cast::Method::GBH, cast::Method::GBY,
                                             cast::Method::LCAST, cast::Method::QCAST};
  const std::vector<cast::ThresholdRow> rows =
      cast::threshold_table(size, rbars, methods, 0.05);

  const auto curve = [&](cast::Method method, double rbar) {
    std::vector<double> thresholds(size, 0.0);
    for (const cast::ThresholdRow& row : rows) {
      if (row.method == method && row.mean_correlation == rbar) {
        thresholds[row.rank - 1] = row.threshold;
      }
    }
    return thresholds;
  };

  for (const double rbar : rbars) {
    const std::vector<double> linear = curve(cast::Method::LCAST, rbar);
    const std::vector<double> gbh = curve(cast::Method::GBH, rbar);
    const std::vector<double> gby = curve(cast::Method::GBY, rbar);
    std::size_t above_gbh = 0;
    std::size_t above_gby = 0;
    for (std::size_t j = 0; j < size; ++j) {
      if (linear[j] > gbh[j]) ++above_gbh;
      if (linear[j] > gby[j]) ++above_gby;
    }
    r.check(above_gbh == 0, "rbar = " + num(rbar) + ": lcast curve at or below gbh (" +
                                std::to_string(above_gbh) + " ranks above)");
    r.check(above_gby == 0, "rbar = " + num(rbar) + ": lcast curve at or below gby (" +
                                std::to_string(above_gby) + " ranks above)");
    r.info("rbar = " + num(rbar) + ": rank-1 thresholds lcast = " + num(linear[0]) +
           ", gbh = " + num(gbh[0]) + ", gby = " + num(gby[0]));
  }
  for (const double rbar : {0.0, 0.9}) {
    const double quadratic = curve(cast::Method::QCAST, rbar)[0];
    const double gby = curve(cast::Method::GBY, rbar)[0];
    r.check(quadratic < gby, "rbar = " + num(rbar) + ": qcast rank-1 threshold " +
                                 num(quadratic) + " below gby " + num(gby));
  }
  return r;
}

// Criterion 10: one large replicate with bounded coupling stays inside an
// 8 GB budget and reports consistent counts.
Report criterion10() {
  Report r;
  cast::SimulationScenario s;
  s.features = 120000;
  s.groups = 9600;
  s.coupling = cast::CouplingScheme::BoundedPartners;
  const auto start = std::chrono::steady_clock::now();
  const cast::ReplicateResult result =
      cast::run_replicate(s, cast::derive_seed(kMasterSeed, 9, 0), false);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  bool consistent = result.counts.size() == s.methods.size();
  for (const cast::MethodCounts& counts : result.counts) {
    if (counts.false_rejections + counts.true_rejections != counts.rejections)
      consistent = false;
    if (counts.true_rejections > result.nonnull_count) consistent = false;
    if (counts.rejections > s.features) consistent = false;
  }
  r.check(consistent, "per-method counts are internally consistent");
  r.check(result.nonnull_count == 1200,
          "planted signals = " + std::to_string(result.nonnull_count) + " (expected 1200)");

  struct rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  const double peak_gb = static_cast<double>(usage.ru_maxrss) / (1024.0 * 1024.0);
  r.check(peak_gb < 8.0, "peak resident set = " + num(peak_gb) + " GB < 8 GB");
  r.info("replicate took " + num(seconds) + " s");
  for (std::size_t i = 0; i < result.counts.size(); ++i) {
    r.info(std::string(cast::method_name(result.counts[i].method)) +
           ": R = " + std::to_string(result.counts[i].rejections) +
           ", V = " + std::to_string(result.counts[i].false_rejections));
  }
  return r;
}

struct Criterion {
  int number;
  const char* label;
  Report (*run)();
};

const Criterion kCriteria[] = {
    {1, "coupled-design band", criterion1},
    {2, "block-diagonal band", criterion2},
    {3, "weak-signal ordering", criterion3},
    {4, "reciprocal-rank reduction", criterion4},
    {5, "singleton reduction", criterion5},
    {6, "factor identities", criterion6},
    {7, "step-up scan oracle", criterion7},
    {8, "null calibration", criterion8},
    {9, "threshold-curve ordering", criterion9},
    {10, "large-replicate budget", criterion10},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int number = std::atoi(argv[i]);
    if (number < 1 || number > 10) {
      std::cerr << "usage: " << argv[0] << " [criterion numbers in 1..10]\n";
      return 2;
    }
    selected.push_back(number);
  }
  if (selected.empty()) {
    for (const Criterion& criterion : kCriteria) selected.push_back(criterion.number);
  }

  int failures = 0;
  for (const int number : selected) {
    const Criterion& criterion = kCriteria[number - 1];
    Report report;
    try {
      report = criterion.run();
    } catch (const std::exception& error) {
      report.pass = false;
      report.notes.push_back(std::string("  FAIL unexpected error: ") + error.what());
    }
    for (const std::string& note : report.notes) std::cout << note << "\n";
    std::cout << "criterion " << number << " (" << criterion.label
              << "): " << (report.pass ? "PASS" : "FAIL") << "\n";
    if (!report.pass) ++failures;
  }
  return failures;
}
