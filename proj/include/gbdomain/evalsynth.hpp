#pragma once

#include "gbdomain/assignment.hpp"
#include "gbdomain/discover.hpp"
#include "gbdomain/featstats.hpp"
#include "gbdomain/kmeans.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gbdomain {

struct StratificationReport {
  Vector medians;  // m_d per pseudo-domain
  double delta_med = 0.0;
  double sigma_med = 0.0;
};

/// Per-domain lower median of GT counts, their range and population std.
StratificationReport count_stratification(const Labels& labels, const Eigen::Ref<const Vector>& gt_counts, int k);

double adjusted_rand_index(const Labels& a, const Labels& b);

/// Mean fraction of samples whose label changes between consecutive epochs.
/// Every epoch after the first must carry alignment metadata.
double label_churn(std::span<const PseudoDomainAssignment> aligned_epochs);

/// Shuffle-and-split into K groups whose sizes differ by at most one.
PseudoDomainAssignment random_partition(Index n, int k, std::uint64_t rng_seed);

/// PCA followed by sample-level K-means (the same path discover falls back to).
PseudoDomainAssignment flat_kmeans_partition(const Points& descriptors, int k, std::optional<Index> pca_d,
                                             std::uint64_t rng_seed, const KMeansOptions& options = {});

struct DomainSpec {
  Vector center;
  double scale = 1.0;        // isotropic standard deviation
  Index count = 100;         // samples
  double count_regime = 100; // median GT count
};

struct SynthSpec {
  std::vector<DomainSpec> domains;
  double outlier_fraction = 0.0;  // share of outliers in the final set
  double count_log_sigma = 0.3;   // lognormal spread of GT counts
  double outlier_box_inflation = 0.25;
  std::uint64_t rng_seed = 0;

  int k_true() const { return static_cast<int>(domains.size()); }
  void validate() const;
};

/// K domains with random centers rescaled so the closest pair sits
/// `separation` apart, unit scale, and geometric count regimes
/// base_count * count_ratio^k.
SynthSpec make_mixture_spec(int k, Index dim, Index per_domain, double separation, std::uint64_t rng_seed,
                            double outlier_fraction = 0.0, double base_count = 50.0, double count_ratio = 3.0);

struct SynthData {
  DescriptorSet set;    // carries counts and true domains (-1 for outliers)
  Labels true_labels;
};

SynthData generate_mixture(const SynthSpec& spec);

/// X + a per-epoch random rotation (in one coordinate plane, about the data
/// mean), translation and i.i.d. noise. Deterministic per (seed, epoch).
Points apply_drift(const Points& x, int epoch, double drift_sigma, std::uint64_t rng_seed);

enum class PartitionMethod { GbDiscovery, FlatKMeans, Random };

std::string to_string(PartitionMethod m);
PartitionMethod method_from_string(const std::string& name);

struct StabilityTrial {
  std::vector<PseudoDomainAssignment> epochs;  // aligned to the previous epoch from epoch 1 on
  double churn = 0.0;
  StratificationReport stratification;         // of epoch 0
  double ari_epoch0 = 0.0;                     // against the true labels, outliers included
};

/// Runs `epochs` rounds of partitioning on cumulatively drifted descriptors.
/// Clustering and drift streams derive from params.rng_seed.
StabilityTrial stability_trial(const SynthData& data, PartitionMethod method, int epochs, double drift_sigma,
                               const DiscoverParams& params);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace gbdomain
