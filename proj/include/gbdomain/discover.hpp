#pragma once

#include "gbdomain/assignment.hpp"
#include "gbdomain/featstats.hpp"
#include "gbdomain/gbdivide.hpp"
#include "gbdomain/kmeans.hpp"
#include "gbdomain/pca.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>

namespace gbdomain {

struct DiscoverParams {
  int k = 4;
  std::optional<Index> pca_d;  // default_pca_dim when unset
  DivisionParams division;
  std::uint64_t rng_seed = 0;
  int epoch = 0;
  KMeansOptions kmeans;
  /// Weight each ball center by its member count in the representative K-means.
  bool size_weighted_centers = true;
  int threads = 1;
};

struct Discovery {
  PseudoDomainAssignment assignment;
  std::optional<BallSet> balls;  // absent for N = 1
  std::optional<PcaModel> pca;
  Points reduced;
};

/// Row m is the mean of ball m's members; rows follow ball_id order.
Points ball_centers(const BallSet& balls, const Points& z_reduced);

/// Sample-level K-means on reduced descriptors. Shared by the fallback path
/// and the flat K-means baseline.
Labels sample_kmeans_labels(const Points& z_reduced, int k, std::uint64_t rng_seed, const KMeansOptions& options = {});

/// PCA (refit) -> granular-ball division -> K-means on ball centers -> label
/// inheritance, with sample-level K-means when fewer than K balls survive.
/// When `previous` is given the labels are aligned to it.
Discovery discover(const Points& descriptors, const DiscoverParams& params,
                   const PseudoDomainAssignment* previous = nullptr);
Discovery discover(const DescriptorSet& descriptors, const DiscoverParams& params,
                   const PseudoDomainAssignment* previous = nullptr);

/// Reduces descriptors the way discover does (refit PCA of the default or given dimension).
Points reduce_descriptors(const Points& descriptors, std::optional<Index> pca_d, PcaModel* model_out = nullptr);

struct KSuggestion {
  double k0 = 1.0;
  std::set<int> candidates;
};

/// k0 = N^(1/4) and the integers round(k0)-1 .. round(k0)+1 that are >= 1.
KSuggestion suggest_k(Index n);

/// Presets: sha -> 4, shb -> 3, qnrf -> 6, sha+shb -> 5 (case-insensitive).
std::optional<int> preset_k(const std::string& dataset_tag);

}  // namespace gbdomain
