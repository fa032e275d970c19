#pragma once

#include "gbdomain/types.hpp"

#include <cstdint>
#include <optional>

namespace gbdomain {

struct KMeansOptions {
  int max_iter = 300;
  double tol = 1e-10;  // relative inertia change
  int n_init = 20;     // independent k-means++ restarts; lowest inertia wins
};

struct KMeansResult {
  Labels labels;
  Matrix centers;  // K x d
  double inertia = 0.0;
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations. Deterministic for a fixed
/// seed. Optional per-point weights turn means and inertia into weighted ones.
KMeansResult kmeans(const Eigen::Ref<const Points>& points, int k, std::uint64_t rng_seed,
                    const KMeansOptions& options = {}, const std::optional<Vector>& weights = std::nullopt);

}  // namespace gbdomain
