#include "castfdr/simulation.hpp"

#include <lapacke.h>

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <unordered_map>

#include "castfdr/procedures.hpp"

namespace cast {

namespace {

void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

void require_probability(double value, const char* name) {
  require(value >= 0.0 && value <= 1.0, ErrorKind::InvalidArgument,
          std::string(name) + " must lie in [0, 1]");
}

}  // namespace

GroupSizeScheme parse_group_size_scheme(std::string_view name) {
  if (name == "equal_split") return GroupSizeScheme::EqualSplit;
  if (name == "heterogeneous") return GroupSizeScheme::Heterogeneous;
  throw Error(ErrorKind::InvalidArgument,
              "unknown group size scheme '" + std::string(name) + "'");
}

CouplingScheme parse_coupling_scheme(std::string_view name) {
  if (name == "exhaustive") return CouplingScheme::Exhaustive;
  if (name == "bounded_partners") return CouplingScheme::BoundedPartners;
  throw Error(ErrorKind::InvalidArgument,
              "unknown coupling scheme '" + std::string(name) + "'");
}

const char* group_size_scheme_name(GroupSizeScheme scheme) {
  return scheme == GroupSizeScheme::EqualSplit ? "equal_split" : "heterogeneous";
}

const char* coupling_scheme_name(CouplingScheme scheme) {
  return scheme == CouplingScheme::Exhaustive ? "exhaustive" : "bounded_partners";
}

double RhoLaw::draw(Rng& rng) const {
  const double magnitude = rng.uniform(magnitude_min, magnitude_max);
  const bool positive = rng.bernoulli(positive_prob);
  return positive ? magnitude : -magnitude;
}

void RhoLaw::validate() const {
  require(magnitude_min >= 0.0 && magnitude_min <= magnitude_max && magnitude_max < 1.0,
          ErrorKind::InvalidArgument,
          "correlation magnitudes must satisfy 0 <= min <= max < 1");
  require_probability(positive_prob, "positive sign probability");
}

void SimulationScenario::validate() const {
  require(groups >= 1, ErrorKind::InvalidArgument, "need at least one group");
  require(features >= groups, ErrorKind::InfeasiblePartition,
          "cannot split " + std::to_string(features) + " features into " +
              std::to_string(groups) + " non-empty groups");
  require_probability(case_fraction, "case fraction");
  const long cases = round_half_even(case_fraction * static_cast<double>(subjects));
  const long controls = static_cast<long>(subjects) - cases;
  require(cases >= 2 && controls >= 2, ErrorKind::InvalidArgument,
          "need at least two cases and two controls");
  require(size_spread >= 0.0, ErrorKind::InvalidArgument, "size spread must be non-negative");
  require(noise_sd > 0.0, ErrorKind::InvalidArgument, "noise scale must be positive");
  require_probability(nonnull_fraction, "non-null fraction");
  require_probability(signal_group_fraction, "signal group fraction");
  require_probability(within_prob, "within-group entry probability");
  require_probability(between_prob, "cross-pair entry probability");
  require_probability(coupling_prob, "coupling probability");
  rho.validate();
  require(max_partners >= 1, ErrorKind::InvalidArgument, "partner bound must be at least 1");
  require(component_cap >= 1, ErrorKind::InvalidArgument, "component cap must be at least 1");
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument,
          "alpha must lie strictly between 0 and 1");
  require(!methods.empty(), ErrorKind::InvalidArgument, "need at least one method to score");
  require(replicates >= 1, ErrorKind::InvalidArgument, "need at least one replicate");
}

long round_half_even(double value) {
  require(value >= 0.0 && std::isfinite(value), ErrorKind::InvalidArgument,
          "can only round finite non-negative values");
  const double floored = std::floor(value);
  const double fraction = value - floored;
  constexpr double kHalfSnap = 1e-9;
  if (std::abs(fraction - 0.5) <= kHalfSnap) {
    const long low = static_cast<long>(floored);
    return (low % 2 == 0) ? low : low + 1;
  }
  return static_cast<long>(std::floor(value + 0.5));
}

FeatureId feature_label(std::size_t index, std::size_t total) {
  int width = 1;
  for (std::size_t v = total; v >= 10; v /= 10) ++width;
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "f%0*zu", width, index);
  return buffer;
}

GroupId group_label(std::size_t index, std::size_t total) {
  int width = 1;
  for (std::size_t v = total; v >= 10; v /= 10) ++width;
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "g%0*zu", width, index);
  return buffer;
}

std::vector<std::size_t> build_group_sizes(std::size_t groups, std::size_t features,
                                           GroupSizeScheme scheme, double spread, Rng* rng) {
  require(groups >= 1, ErrorKind::InvalidArgument, "need at least one group");
  require(features >= groups, ErrorKind::InfeasiblePartition,
          "cannot split " + std::to_string(features) + " features into " +
              std::to_string(groups) + " non-empty groups");

  std::vector<std::size_t> sizes(groups);
  if (scheme == GroupSizeScheme::EqualSplit) {
    const std::size_t base = features / groups;
    const std::size_t extra = features % groups;
    for (std::size_t g = 0; g < groups; ++g) sizes[g] = base + (g < extra ? 1 : 0);
    return sizes;
  }

  require(rng != nullptr, ErrorKind::InvalidArgument,
          "heterogeneous sizes need a random stream");
  // Lognormal weights, then a largest-remainder integerization that keeps
  // every group non-empty and the total exact.
  std::vector<double> weights(groups);
  double total_weight = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    weights[g] = std::exp(spread * rng->normal());
    total_weight += weights[g];
  }
  const double mean_free = static_cast<double>(features - groups);  // after 1 each
  std::vector<std::pair<double, std::size_t>> remainders(groups);
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const double share = mean_free * weights[g] / total_weight;
    const auto whole = static_cast<std::size_t>(std::floor(share));
    sizes[g] = 1 + whole;
    assigned += whole;
    remainders[g] = {share - std::floor(share), g};
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // deterministic tie order
  });
  for (std::size_t i = 0; assigned < features - groups; ++i, ++assigned) {
    sizes[remainders[i].second] += 1;
  }
  return sizes;
}

std::size_t BlockSparseCovariance::total_features() const {
  return group_offsets.empty() ? 0 : group_offsets.back() + group_sizes.back();
}

namespace {

// Plain union-find over group indices.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

struct WithinEntry {
  std::size_t group = 0;
  std::size_t a = 0;  // local feature indices, a < b
  std::size_t b = 0;
  double rho = 0.0;
};

struct CrossEntry {
  std::size_t group_a = 0;
  std::size_t group_b = 0;
  std::size_t a = 0;  // local in group_a
  std::size_t b = 0;  // local in group_b
  double rho = 0.0;
};

}  // namespace

BlockSparseCovariance build_covariance(const SimulationScenario& scenario,
                                       const std::vector<std::size_t>& sizes, Rng& rng) {
  const std::size_t groups = sizes.size();
  require(groups >= 1, ErrorKind::InvalidArgument, "need at least one group");

  BlockSparseCovariance cov;
  cov.group_sizes = sizes;
  cov.group_offsets.resize(groups);
  std::size_t offset = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    cov.group_offsets[g] = offset;
    offset += sizes[g];
  }
  for (std::size_t g = 0; g < groups; ++g) {
    require(sizes[g] <= scenario.component_cap, ErrorKind::ComponentTooLarge,
            "group of " + std::to_string(sizes[g]) + " features exceeds the dense block cap of " +
                std::to_string(scenario.component_cap));
  }

  // Draw order is pinned: within-group entries by group, then the coupling
  // graph, then cross entries by coupled pair. Each selected entry draws its
  // correlation immediately.
  std::vector<WithinEntry> within;
  cov.within_counts.assign(groups, 0);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t a = 0; a + 1 < sizes[g]; ++a) {
      for (std::size_t b = a + 1; b < sizes[g]; ++b) {
        if (!rng.bernoulli(scenario.within_prob)) continue;
        within.push_back({g, a, b, scenario.rho.draw(rng)});
        ++cov.within_counts[g];
      }
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> coupled;
  if (scenario.coupling == CouplingScheme::Exhaustive) {
    for (std::size_t g = 0; g + 1 < groups; ++g) {
      for (std::size_t h = g + 1; h < groups; ++h) {
        if (rng.bernoulli(scenario.coupling_prob)) coupled.emplace_back(g, h);
      }
    }
  } else {
    // Random blocks of max_partners + 1 groups; only pairs inside a block
    // may couple, which bounds both the partner count and the component
    // size without thinning the local coupling rate.
    std::vector<std::size_t> permutation(groups);
    std::iota(permutation.begin(), permutation.end(), std::size_t{0});
    rng.shuffle(permutation);
    const std::size_t block = scenario.max_partners + 1;
    for (std::size_t start = 0; start < groups; start += block) {
      const std::size_t stop = std::min(start + block, groups);
      for (std::size_t i = start; i < stop; ++i) {
        for (std::size_t j = i + 1; j < stop; ++j) {
          if (rng.bernoulli(scenario.coupling_prob)) {
            coupled.emplace_back(std::min(permutation[i], permutation[j]),
                                 std::max(permutation[i], permutation[j]));
          }
        }
      }
    }
    std::sort(coupled.begin(), coupled.end());
  }

  std::vector<CrossEntry> cross;
  DisjointSets components(groups);
  for (const auto& [g, h] : coupled) {
    std::size_t realized = 0;
    for (std::size_t a = 0; a < sizes[g]; ++a) {
      for (std::size_t b = 0; b < sizes[h]; ++b) {
        if (!rng.bernoulli(scenario.between_prob)) continue;
        cross.push_back({g, h, a, b, scenario.rho.draw(rng)});
        ++realized;
      }
    }
    if (realized > 0) {
      components.unite(g, h);
      cov.between_counts.push_back({g, h, realized});
    }
  }

  std::unordered_map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t g = 0; g < groups; ++g) members[components.find(g)].push_back(g);

  std::vector<std::size_t> roots;
  roots.reserve(members.size());
  for (const auto& [root, list] : members) roots.push_back(root);
  std::sort(roots.begin(), roots.end());

  // Local placement of each group inside its component's dense block.
  std::vector<std::size_t> component_of(groups);
  std::vector<std::size_t> local_offset(groups);
  cov.components.reserve(roots.size());
  for (std::size_t c = 0; c < roots.size(); ++c) {
    BlockSparseCovariance::Component component;
    component.groups = members[roots[c]];  // already ascending
    std::size_t width = 0;
    for (std::size_t g : component.groups) {
      component_of[g] = c;
      local_offset[g] = width;
      width += sizes[g];
    }
    require(width <= scenario.component_cap, ErrorKind::ComponentTooLarge,
            "coupled component of " + std::to_string(width) +
                " features exceeds the dense block cap of " +
                std::to_string(scenario.component_cap));
    component.correlation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(width),
                                                      static_cast<Eigen::Index>(width));
    cov.components.push_back(std::move(component));
  }

  for (const WithinEntry& entry : within) {
    auto& block = cov.components[component_of[entry.group]].correlation;
    const auto i = static_cast<Eigen::Index>(local_offset[entry.group] + entry.a);
    const auto j = static_cast<Eigen::Index>(local_offset[entry.group] + entry.b);
    block(i, j) = entry.rho;
    block(j, i) = entry.rho;
  }
  for (const CrossEntry& entry : cross) {
    auto& block = cov.components[component_of[entry.group_a]].correlation;
    const auto i = static_cast<Eigen::Index>(local_offset[entry.group_a] + entry.a);
    const auto j = static_cast<Eigen::Index>(local_offset[entry.group_b] + entry.b);
    block(i, j) = entry.rho;
    block(j, i) = entry.rho;
  }

  for (auto& component : cov.components) {
    bool changed = false;
    component.correlation = nearest_pd_repair(component.correlation, &changed);
    component.repaired = changed;
  }
  return cov;
}

Eigen::MatrixXd nearest_pd_repair(const Eigen::MatrixXd& correlation, bool* changed) {
  if (changed != nullptr) *changed = false;
  const Eigen::Index n = correlation.rows();
  require(n >= 1 && correlation.cols() == n, ErrorKind::InvalidArgument,
          "repair needs a square matrix");
  for (Eigen::Index i = 0; i < n; ++i) {
    require(std::abs(correlation(i, i) - 1.0) <= 1e-9, ErrorKind::InvalidArgument,
            "repair needs a unit diagonal");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      require(std::abs(correlation(i, j) - correlation(j, i)) <= 1e-9,
              ErrorKind::InvalidArgument, "repair needs a symmetric matrix");
    }
  }
  if (n == 1) return correlation;

  // dsyevd overwrites its input with the eigenvectors.
  Eigen::MatrixXd vectors = correlation;
  Eigen::VectorXd values(n);
  const auto info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n),
                                   vectors.data(), static_cast<lapack_int>(n), values.data());
  require(info == 0, ErrorKind::InvalidArgument,
          "eigendecomposition failed with status " + std::to_string(info));

  const double floor_value = 1e-6 * values.mean();
  if (values.minCoeff() >= floor_value) return correlation;
  if (changed != nullptr) *changed = true;

  const Eigen::VectorXd floored = values.cwiseMax(floor_value);
  Eigen::MatrixXd repaired = vectors * floored.asDiagonal() * vectors.transpose();
  Eigen::VectorXd inverse_scale(n);
  for (Eigen::Index i = 0; i < n; ++i) inverse_scale(i) = 1.0 / std::sqrt(repaired(i, i));
  repaired = inverse_scale.asDiagonal() * repaired * inverse_scale.asDiagonal();
  repaired = ((repaired + repaired.transpose()) / 2.0).eval();
  for (Eigen::Index i = 0; i < n; ++i) {
    repaired(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = std::clamp(repaired(i, j), -1.0, 1.0);
      repaired(i, j) = r;
      repaired(j, i) = r;
    }
  }
  return repaired;
}

SignalMask assign_signals(const SimulationScenario& scenario,
                          const std::vector<std::size_t>& sizes, Rng& rng) {
  const std::size_t groups = sizes.size();
  const std::size_t features = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});

  SignalMask mask;
  mask.nonnull.assign(features, 0);
  mask.per_group.assign(groups, 0);
  if (scenario.nonnull_fraction == 0.0) return mask;

  const auto signals =
      static_cast<std::size_t>(round_half_even(scenario.nonnull_fraction * features));
  const auto signal_groups =
      static_cast<std::size_t>(round_half_even(scenario.signal_group_fraction * groups));
  require(signal_groups >= 1, ErrorKind::InfeasibleSignalCounts,
          "a positive non-null fraction needs at least one signal group");
  require(signals >= signal_groups, ErrorKind::InfeasibleSignalCounts,
          std::to_string(signals) + " signal features cannot cover " +
              std::to_string(signal_groups) + " signal groups");

  std::vector<std::size_t> offsets(groups);
  std::size_t offset = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    offsets[g] = offset;
    offset += sizes[g];
  }

  mask.signal_groups = rng.sample_without_replacement(groups, signal_groups);
  std::sort(mask.signal_groups.begin(), mask.signal_groups.end());

  // One anchor per chosen group keeps every signal group non-empty.
  for (std::size_t g : mask.signal_groups) {
    const std::size_t local = static_cast<std::size_t>(rng.below(sizes[g]));
    mask.nonnull[offsets[g] + local] = 1;
  }
  std::vector<std::size_t> pool;
  for (std::size_t g : mask.signal_groups) {
    for (std::size_t local = 0; local < sizes[g]; ++local) {
      if (mask.nonnull[offsets[g] + local] == 0) pool.push_back(offsets[g] + local);
    }
  }
  const std::size_t extra = signals - signal_groups;
  require(extra <= pool.size(), ErrorKind::InfeasibleSignalCounts,
          "the chosen signal groups cannot hold " + std::to_string(signals) + " signals");
  for (std::size_t pick : rng.sample_without_replacement(pool.size(), extra)) {
    mask.nonnull[pool[pick]] = 1;
  }

  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t local = 0; local < sizes[g]; ++local) {
      mask.per_group[g] += mask.nonnull[offsets[g] + local];
    }
  }
  mask.count = signals;
  return mask;
}

std::pair<DataMatrix, PhenotypeVector> sample_dataset(const SimulationScenario& scenario,
                                                      const BlockSparseCovariance& covariance,
                                                      const SignalMask& mask, Rng& rng) {
  const std::size_t features = covariance.total_features();
  require(mask.nonnull.size() == features, ErrorKind::InvalidArgument,
          "signal mask does not match the covariance layout");
  const std::size_t subjects = scenario.subjects;
  const auto cases =
      static_cast<std::size_t>(round_half_even(scenario.case_fraction * subjects));
  const std::size_t controls = subjects - cases;

  std::vector<std::uint8_t> labels(subjects, 0);
  for (std::size_t s = controls; s < subjects; ++s) labels[s] = 1;
  PhenotypeVector phenotype = PhenotypeVector::from_labels(std::move(labels));

  DataMatrix matrix;
  matrix.subjects = subjects;
  matrix.features.resize(features);
  for (std::size_t g = 0; g < covariance.group_sizes.size(); ++g) {
    for (std::size_t local = 0; local < covariance.group_sizes[g]; ++local) {
      matrix.features[covariance.group_offsets[g] + local] =
          feature_label(covariance.group_offsets[g] + local, features);
    }
  }
  matrix.values.resize(features * subjects);

  for (const auto& component : covariance.components) {
    const Eigen::Index width = component.correlation.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(component.correlation);
    Eigen::MatrixXd root;
    if (llt.info() == Eigen::Success) {
      root = llt.matrixL();
    } else {
      // The repair guarantees positive eigenvalues; if rounding still trips
      // the factorization, fall back to the symmetric square root.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(component.correlation);
      root = solver.eigenvectors() *
             solver.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
             solver.eigenvectors().transpose();
    }

    Eigen::MatrixXd z(width, static_cast<Eigen::Index>(subjects));
    for (Eigen::Index i = 0; i < width; ++i) {
      for (Eigen::Index s = 0; s < static_cast<Eigen::Index>(subjects); ++s) {
        z(i, s) = rng.normal();
      }
    }
    const Eigen::MatrixXd samples = scenario.noise_sd * (root * z);

    Eigen::Index local_row = 0;
    for (std::size_t g : component.groups) {
      for (std::size_t local = 0; local < covariance.group_sizes[g]; ++local, ++local_row) {
        const std::size_t feature = covariance.group_offsets[g] + local;
        double* row = matrix.values.data() + feature * subjects;
        for (std::size_t s = 0; s < subjects; ++s) {
          row[s] = samples(local_row, static_cast<Eigen::Index>(s));
        }
        if (mask.nonnull[feature] != 0) {
          for (std::size_t s = controls; s < subjects; ++s) row[s] += scenario.signal_shift;
        }
      }
    }
  }
  return {std::move(matrix), std::move(phenotype)};
}

ReplicateResult run_replicate(const SimulationScenario& scenario, std::uint64_t seed,
                              bool collect_pvalues) {
  scenario.validate();
  Rng rng(seed);

  const std::vector<std::size_t> sizes =
      build_group_sizes(scenario.groups, scenario.features, scenario.size_scheme,
                        scenario.size_spread, &rng);
  const BlockSparseCovariance covariance = build_covariance(scenario, sizes, rng);
  const SignalMask mask = assign_signals(scenario, sizes, rng);
  auto [matrix, phenotype] = sample_dataset(scenario, covariance, mask, rng);

  const MatrixPValues tested = matrix_pvalues(matrix, phenotype, scenario.test_variant);

  std::vector<PValueEntry> entries;
  entries.reserve(scenario.features);
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const GroupId group = group_label(g, sizes.size());
    for (std::size_t local = 0; local < sizes[g]; ++local) {
      const std::size_t feature = covariance.group_offsets[g] + local;
      entries.push_back({matrix.features[feature], group, tested.pvalues[feature]});
    }
  }
  const GroupedPValueSet set = GroupedPValueSet::validate(std::move(entries));

  const bool needs_correlations =
      std::any_of(scenario.methods.begin(), scenario.methods.end(), method_uses_correlations);
  MeanCorrelationSet means;
  if (needs_correlations) {
    // The procedures see correlations estimated from the same data that
    // produced the p-values, exactly as a consumer of real data would.
    for (std::size_t g = 0; g < sizes.size(); ++g) {
      if (sizes[g] < 2) continue;
      std::vector<FeatureId> order(sizes[g]);
      Eigen::MatrixXd values(static_cast<Eigen::Index>(sizes[g]),
                             static_cast<Eigen::Index>(scenario.subjects));
      for (std::size_t local = 0; local < sizes[g]; ++local) {
        const std::size_t feature = covariance.group_offsets[g] + local;
        order[local] = matrix.features[feature];
        const std::span<const double> row = matrix.row(feature);
        for (std::size_t s = 0; s < scenario.subjects; ++s) {
          values(static_cast<Eigen::Index>(local), static_cast<Eigen::Index>(s)) = row[s];
        }
      }
      const GroupId group = group_label(g, sizes.size());
      means.emplace(group,
                    mean_row_correlation(pearson_group_correlation(group, std::move(order), values)));
    }
  }

  std::unordered_map<std::string_view, bool> truth;
  truth.reserve(matrix.features.size());
  for (std::size_t feature = 0; feature < matrix.features.size(); ++feature) {
    truth.emplace(matrix.features[feature], mask.nonnull[feature] != 0);
  }

  ReplicateResult result;
  result.nonnull_count = mask.count;
  result.counts.reserve(scenario.methods.size());
  for (Method method : scenario.methods) {
    const AdjustmentResult adjusted =
        run_adjustment(set, needs_correlations ? &means : nullptr, method, scenario.alpha);
    MethodCounts counts;
    counts.method = method;
    counts.rejections = adjusted.rejections;
    for (const FeatureResult& feature : adjusted.features) {
      if (!feature.rejected) continue;
      if (truth.at(feature.feature)) {
        ++counts.true_rejections;
      } else {
        ++counts.false_rejections;
      }
    }
    result.counts.push_back(counts);
  }
  if (collect_pvalues) result.pvalues = tested.pvalues;
  return result;
}

StudyResult run_study(const std::vector<SimulationScenario>& grid, std::uint64_t master_seed,
                      std::size_t threads) {
  require(!grid.empty(), ErrorKind::EmptyInput, "the scenario grid is empty");
  for (const SimulationScenario& scenario : grid) {
    scenario.validate();
    require(scenario.replicates >= 2, ErrorKind::TooFewReplicates,
            "summaries need at least two replicates per scenario");
  }
  if (threads == 0) threads = 1;

  StudyResult study;
  study.master_seed = master_seed;
  study.reports.reserve(grid.size());

  for (std::size_t point = 0; point < grid.size(); ++point) {
    const SimulationScenario& scenario = grid[point];
    std::vector<ReplicateResult> replicates(scenario.replicates);

    if (threads <= 1 || scenario.replicates <= 1) {
      for (std::size_t r = 0; r < scenario.replicates; ++r) {
        replicates[r] = run_replicate(scenario, derive_seed(master_seed, point, r));
      }
    } else {
      std::atomic<std::size_t> next{0};
      std::exception_ptr first_error;
      std::mutex error_mutex;
      auto worker = [&]() {
        for (;;) {
          const std::size_t r = next.fetch_add(1);
          if (r >= scenario.replicates) return;
          try {
            replicates[r] = run_replicate(scenario, derive_seed(master_seed, point, r));
          } catch (...) {
            std::scoped_lock lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      };
      std::vector<std::thread> pool;
      const std::size_t workers = std::min(threads, scenario.replicates);
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
      if (first_error) std::rethrow_exception(first_error);
    }

    ScenarioReport report;
    report.scenario = scenario;
    report.replicates.reserve(scenario.replicates);
    for (std::size_t r = 0; r < scenario.replicates; ++r) {
      report.replicates.push_back({r, replicates[r].nonnull_count, replicates[r].counts});
    }
    for (std::size_t m = 0; m < scenario.methods.size(); ++m) {
      std::vector<double> rejections(scenario.replicates);
      std::vector<double> fdps(scenario.replicates);
      std::vector<double> tpps(scenario.replicates);
      for (std::size_t r = 0; r < scenario.replicates; ++r) {
        const MethodCounts& counts = replicates[r].counts[m];
        rejections[r] = static_cast<double>(counts.rejections);
        fdps[r] = fdp(counts.false_rejections, counts.rejections);
        tpps[r] = tpp(counts.true_rejections, replicates[r].nonnull_count);
      }
      report.methods.push_back(
          summarize_method(scenario.methods[m], rejections, fdps, tpps));
    }
    study.reports.push_back(std::move(report));
  }
  return study;
}

}  // namespace cast
