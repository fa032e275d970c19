#pragma once

#include "gbdomain/types.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace gbdomain {

/// Nonnegative per-dimension weights summing to one.
class WeightVector {
 public:
  WeightVector() = default;
  /// Throws unless entries are finite, nonnegative and sum to 1 (to 1e-9).
  explicit WeightVector(Vector w);

  static WeightVector uniform(Index d);

  const Vector& values() const { return w_; }
  Index size() const { return w_.size(); }
  double operator()(Index j) const { return w_(j); }

 private:
  Vector w_;
};

/// sqrt(sum_j w_j (z_j - c_j)^2)
template <typename DerivedA, typename DerivedB>
double weighted_distance(const Eigen::MatrixBase<DerivedA>& z, const Eigen::MatrixBase<DerivedB>& c,
                         const WeightVector& w) {
  require(z.size() == c.size() && z.size() == w.size(), ErrorCode::InvalidArgument,
          "weighted_distance: dimension mismatch");
  const auto diff = (z.derived().reshaped() - c.derived().reshaped()).array();
  return std::sqrt((w.values().array() * diff.square()).sum());
}

struct SeedPair {
  Index first = 0;   // sample farthest from the member mean
  Index second = 0;  // sample farthest from `first`
  bool degenerate = false;
};

/// Farthest-point seeding inside one ball. Ties go to the lowest sample index.
/// `rng_seed` is accepted for API stability and does not influence the result.
SeedPair farthest_pair_seed(const Points& z, std::span<const Index> members, const WeightVector& w,
                            std::uint64_t rng_seed = 0);

/// Inverse-scatter weight update. Zero-scatter dimensions get weight 0 and the
/// normalization runs over the positive-scatter dimensions only; if every
/// scatter is zero the result is uniform.
WeightVector update_weights(const Eigen::Ref<const Vector>& scatters, double beta, double eps);

struct SplitOptions {
  double beta = 2.0;
  double eps = 1e-12;
  int max_iter = 100;
  double tol = 1e-8;  // relative objective change
  std::uint64_t rng_seed = 0;
  /// After the alternating updates settle, try every threshold along the
  /// centroid axis and restart from the best one if it lowers the objective.
  bool refine = true;
};

struct SplitResult {
  IndexList left;   // contains the lowest member index
  IndexList right;
  Vector left_centroid;
  Vector right_centroid;
  WeightVector weight;
  double objective = 0.0;
  int iterations = 0;
  /// Objective after every accepted round; non-increasing.
  std::vector<double> objective_trace;
};

/// Per-dimension within-cluster scatter of a two-way partition around the member means.
Vector within_scatter(const Points& z, std::span<const Index> left, std::span<const Index> right);

/// sum_j w_j^beta * D_j for a given partition with mean centroids.
double split_objective(const Points& z, std::span<const Index> left, std::span<const Index> right,
                       const WeightVector& w, double beta);

/// Weighted 2-means over the rows `members` of `z`, starting from uniform
/// weights and farthest-pair seeds. Throws "unsplittable" when all members coincide.
SplitResult weighted_2means(const Points& z, std::span<const Index> members, const SplitOptions& options = {});

}  // namespace gbdomain
