#pragma once

#include "gbdomain/types.hpp"

#include <optional>
#include <string>

namespace gbdomain {

/// Principal subspace of a descriptor matrix. Rows of `components` are
/// orthonormal directions, ordered by non-increasing explained variance.
struct PcaModel {
  Vector mean;
  Matrix components;  // d x D
  Vector explained_variance;
  bool rank_deficient = false;

  Index input_dim() const { return mean.size(); }
  Index output_dim() const { return components.rows(); }
};

/// Default reduced dimension: min(32, D, N-1), at least 1.
Index default_pca_dim(Index n, Index dim);

/// Fits on the population (1/N) covariance of `x`. Each component is
/// sign-normalized so that its largest-magnitude entry is nonnegative.
PcaModel pca_fit(const Eigen::Ref<const Points>& x, Index d);

Points pca_transform(const PcaModel& model, const Eigen::Ref<const Points>& x);

/// Maps reduced rows back into descriptor space.
Points pca_inverse_transform(const PcaModel& model, const Eigen::Ref<const Points>& y);

std::string pca_to_json(const PcaModel& model);
PcaModel pca_from_json(const std::string& text);

}  // namespace gbdomain
