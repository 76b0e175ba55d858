#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "castfdr/core.hpp"
#include "castfdr/correlation.hpp"
#include "castfdr/evaluation.hpp"
#include "castfdr/rng.hpp"
#include "castfdr/testing.hpp"

namespace cast {

enum class GroupSizeScheme { EqualSplit, Heterogeneous };
enum class CouplingScheme { Exhaustive, BoundedPartners };

GroupSizeScheme parse_group_size_scheme(std::string_view name);
CouplingScheme parse_coupling_scheme(std::string_view name);
const char* group_size_scheme_name(GroupSizeScheme scheme);
const char* coupling_scheme_name(CouplingScheme scheme);

// Law of one nonzero correlation entry: magnitude uniform on
// [magnitude_min, magnitude_max], sign positive with positive_prob.
struct RhoLaw {
  double magnitude_min = 0.2;
  double magnitude_max = 0.8;
  double positive_prob = 0.6;

  double draw(Rng& rng) const;
  void validate() const;
};

// One synthetic study configuration: cohort, grouping, correlation topology,
// signal placement and the procedures to score.
struct SimulationScenario {
  std::size_t subjects = 300;             // N
  double case_fraction = 0.5;             // share of subjects that are cases
  std::size_t groups = 100;               // G
  std::size_t features = 1250;            // M
  GroupSizeScheme size_scheme = GroupSizeScheme::EqualSplit;
  double size_spread = 0.5;               // heterogeneous scheme only
  double signal_shift = 1.1;              // mean added to non-null case values
  double noise_sd = 1.0;
  double nonnull_fraction = 0.01;         // share of features carrying signal
  double signal_group_fraction = 0.05;    // share of groups holding the signals
  double within_prob = 0.5;               // a within-group pair gets a nonzero entry
  double between_prob = 0.5;              // a cross pair of a coupled group pair does
  double coupling_prob = 0.5;             // a group pair is coupled at all
  RhoLaw rho;
  CouplingScheme coupling = CouplingScheme::Exhaustive;
  std::size_t max_partners = 2;           // bounded scheme: couplings per group
  std::size_t component_cap = 4096;       // refuse larger dense blocks
  double alpha = 0.05;
  TestVariant test_variant = TestVariant::Pooled;
  std::vector<Method> methods = {Method::GBH, Method::GBY, Method::LCAST, Method::QCAST};
  std::size_t replicates = 100;

  void validate() const;
};

// Nearest-integer count with exact halves resolved to the even neighbour.
// Products such as 0.01 * 1250 sit within rounding noise of a true half, so
// values within 1e-9 of one are treated as exact halves.
long round_half_even(double value);

// Feature and group labels are zero padded so lexicographic order equals
// index order everywhere downstream.
FeatureId feature_label(std::size_t index, std::size_t total);
GroupId group_label(std::size_t index, std::size_t total);

// Group sizes that sum exactly to `features`, each at least 1. The equal
// split needs no randomness; the heterogeneous scheme draws lognormal
// weights with the given spread and integerizes by largest remainder.
std::vector<std::size_t> build_group_sizes(std::size_t groups, std::size_t features,
                                           GroupSizeScheme scheme, double spread,
                                           Rng* rng);

// Block correlation structure: groups carry dense within-group entries,
// coupled group pairs carry cross entries, and connected components of the
// realized coupling graph become the dense blocks that get repaired and
// sampled. Entries hold correlations; the noise scale multiplies in later.
struct BlockSparseCovariance {
  struct Component {
    std::vector<std::size_t> groups;  // ascending
    Eigen::MatrixXd correlation;      // features ordered by group, then index
    bool repaired = false;
  };

  std::vector<std::size_t> group_sizes;
  std::vector<std::size_t> group_offsets;        // first feature of each group
  std::vector<Component> components;             // ascending by first group
  std::vector<std::size_t> within_counts;        // realized entries per group
  // (g, g', realized cross entries); only pairs that stayed coupled
  std::vector<std::array<std::size_t, 3>> between_counts;

  std::size_t total_features() const;
};

BlockSparseCovariance build_covariance(const SimulationScenario& scenario,
                                       const std::vector<std::size_t>& sizes, Rng& rng);

// Eigenvalue floor at 1e-6 times the mean eigenvalue, reconstruction, and
// rescale back to a unit diagonal. Inputs that already satisfy the floor
// come back unchanged; *changed reports which path ran.
Eigen::MatrixXd nearest_pd_repair(const Eigen::MatrixXd& correlation, bool* changed = nullptr);

struct SignalMask {
  std::vector<std::uint8_t> nonnull;     // one flag per feature
  std::vector<std::size_t> per_group;    // non-null features per group
  std::vector<std::size_t> signal_groups;
  std::size_t count = 0;                 // M1
};

// Spreads round(nonnull_fraction * M) signal features over
// round(signal_group_fraction * G) groups, one anchor per chosen group and
// the remainder uniform over those groups' other features.
SignalMask assign_signals(const SimulationScenario& scenario,
                          const std::vector<std::size_t>& sizes, Rng& rng);

// Correlated Gaussian noise per component (controls in the leading columns),
// plus the signal shift added to case values of masked features.
std::pair<DataMatrix, PhenotypeVector> sample_dataset(const SimulationScenario& scenario,
                                                      const BlockSparseCovariance& covariance,
                                                      const SignalMask& mask, Rng& rng);

struct MethodCounts {
  Method method = Method::BH;
  std::size_t rejections = 0;
  std::size_t false_rejections = 0;
  std::size_t true_rejections = 0;
};

struct ReplicateResult {
  std::vector<MethodCounts> counts;  // in scenario method order
  std::size_t nonnull_count = 0;
  std::vector<double> pvalues;       // only when requested
};

// One full pass: sizes, covariance, signals, data, tests, correlation
// estimates from the sampled data, then every requested procedure.
ReplicateResult run_replicate(const SimulationScenario& scenario, std::uint64_t seed,
                              bool collect_pvalues = false);

struct ReplicateRecord {
  std::size_t replicate = 0;
  std::size_t nonnull_count = 0;
  std::vector<MethodCounts> counts;
};

struct ScenarioReport {
  SimulationScenario scenario;
  std::vector<MethodSummary> methods;
  std::vector<ReplicateRecord> replicates;
};

struct StudyResult {
  std::uint64_t master_seed = 0;
  std::vector<ScenarioReport> reports;
};

// Replicate seeds derive from (master seed, scenario index, replicate
// index), so results do not depend on execution order or thread count.
StudyResult run_study(const std::vector<SimulationScenario>& grid, std::uint64_t master_seed,
                      std::size_t threads = 1);

}  // namespace cast
