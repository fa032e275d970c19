#pragma once

#include "gbdomain/gbsplit.hpp"
#include "gbdomain/types.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace gbdomain {

struct DivisionParams {
  double tau = 1.05;  // split margin
  double beta = 8.0;
  double eps = 1e-12;
  int d_max = 12;
  Index min_ball = 4;
  int max_iter = 100;
  double tol = 1e-8;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

enum class LeafReason {
  Rejected,      // split computed but the compactness test failed
  DepthCap,      // depth reached d_max
  BelowMinBall,  // fewer than min_ball members
  Unsplittable,  // all members coincide
};

const char* to_string(LeafReason r);

struct GranularBall {
  Index ball_id = 0;
  IndexList indices;  // ascending sample indices
  Vector center;
  WeightVector weight;
  int depth = 0;
  double compactness = 0.0;  // dm(indices; weight)
  LeafReason reason = LeafReason::Rejected;
};

/// One accepted split: the parent (as it was when popped) and its children's ids.
struct SplitRecord {
  GranularBall parent;
  Index left_id = 0;
  Index right_id = 0;
  WeightVector child_weight;
  double child_dm = 0.0;
};

/// Leaves of the division forest, ordered by ball_id, plus the accepted splits.
struct BallSet {
  std::vector<GranularBall> balls;
  Index n = 0;
  DivisionParams params;
  std::vector<SplitRecord> splits;

  /// ball_id of every sample.
  std::vector<Index> ball_of_sample() const;
  /// Position in `balls` of every sample.
  std::vector<Index> leaf_of_sample() const;
};

/// Mean weighted deviation of members from their mean.
double dm(const Points& z, std::span<const Index> members, const WeightVector& w);

/// Size-weighted compactness of two children under a shared weight.
double child_dm(const Points& z, std::span<const Index> b1, std::span<const Index> b2, const WeightVector& w);

/// Breadth-first division from the root ball (uniform weight). A popped ball
/// becomes two children iff it has at least min_ball members, its depth is
/// below d_max and child_dm < tau * dm(parent; parent weight). Siblings are
/// split on up to `threads` workers; output does not depend on `threads`.
BallSet divide(const Points& z, const DivisionParams& params, int threads = 1);

std::string ballset_to_json(const BallSet& set);

}  // namespace gbdomain
