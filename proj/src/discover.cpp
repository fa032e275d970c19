#include "gbdomain/discover.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace gbdomain {

Points ball_centers(const BallSet& balls, const Points& z_reduced) {
  require(balls.n == z_reduced.rows(), ErrorCode::InvalidArgument, "ball set does not match the descriptor matrix");
  Points centers(static_cast<Index>(balls.balls.size()), z_reduced.cols());
  for (std::size_t m = 0; m < balls.balls.size(); ++m) {
    const auto& idx = balls.balls[m].indices;
    require(!idx.empty(), ErrorCode::InvalidArgument, "empty granular ball");
    Vector c = Vector::Zero(z_reduced.cols());
    for (Index i : idx) c += z_reduced.row(i).transpose();
    centers.row(static_cast<Index>(m)) = (c / static_cast<double>(idx.size())).transpose();
  }
  return centers;
}

Labels sample_kmeans_labels(const Points& z_reduced, int k, std::uint64_t rng_seed, const KMeansOptions& options) {
  return kmeans(z_reduced, k, rng_seed, options).labels;
}

Points reduce_descriptors(const Points& descriptors, std::optional<Index> pca_d, PcaModel* model_out) {
  const Index d = pca_d.value_or(default_pca_dim(descriptors.rows(), descriptors.cols()));
  PcaModel model = pca_fit(descriptors, d);
  Points reduced = pca_transform(model, descriptors);
  if (model_out) *model_out = std::move(model);
  return reduced;
}

Discovery discover(const Points& descriptors, const DiscoverParams& params, const PseudoDomainAssignment* previous) {
  const Index n = descriptors.rows();
  require(params.k >= 1, ErrorCode::InvalidArgument, "K must be at least 1");
  require(n >= params.k, ErrorCode::Precondition,
          "need at least K samples (N=" + std::to_string(n) + ", K=" + std::to_string(params.k) + ")");
  params.division.validate();

  Discovery out;
  PseudoDomainAssignment& a = out.assignment;
  a.k = params.k;
  a.epoch = params.epoch;

  if (n == 1) {
    // nothing to reduce or divide
    a.labels = {0};
    a.source = AssignmentSource::GbRepresentative;
    a.ball_of_sample = std::vector<Index>{0};
    out.reduced = Points::Zero(1, 1);
  } else {
    PcaModel model;
    out.reduced = reduce_descriptors(descriptors, params.pca_d, &model);
    out.pca = std::move(model);
    BallSet balls = divide(out.reduced, params.division, params.threads);
    a.ball_of_sample = balls.ball_of_sample();

    if (static_cast<int>(balls.balls.size()) < params.k) {
      a.source = AssignmentSource::FallbackSampleKMeans;
      a.labels = sample_kmeans_labels(out.reduced, params.k, params.rng_seed, params.kmeans);
    } else {
      a.source = AssignmentSource::GbRepresentative;
      const Points centers = ball_centers(balls, out.reduced);
      std::optional<Vector> weights;
      if (params.size_weighted_centers) {
        weights = Vector(centers.rows());
        for (Index m = 0; m < centers.rows(); ++m)
          (*weights)(m) = static_cast<double>(balls.balls[static_cast<std::size_t>(m)].indices.size());
      }
      const KMeansResult km = kmeans(centers, params.k, params.rng_seed, params.kmeans, weights);
      const std::vector<Index> leaf = balls.leaf_of_sample();
      a.labels.resize(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i)
        a.labels[static_cast<std::size_t>(i)] = km.labels[static_cast<std::size_t>(leaf[static_cast<std::size_t>(i)])];
    }
    out.balls = std::move(balls);
  }

  if (previous) a = align_labels(a, *previous);
  a.validate();
  return out;
}

Discovery discover(const DescriptorSet& descriptors, const DiscoverParams& params,
                   const PseudoDomainAssignment* previous) {
  return discover(descriptors.matrix(), params, previous);
}

KSuggestion suggest_k(Index n) {
  require(n >= 1, ErrorCode::InvalidArgument, "N must be at least 1");
  KSuggestion s;
  s.k0 = std::pow(static_cast<double>(n), 0.25);
  const int r = static_cast<int>(std::lround(s.k0));
  for (int c = r - 1; c <= r + 1; ++c)
    if (c >= 1) s.candidates.insert(c);
  return s;
}

std::optional<int> preset_k(const std::string& dataset_tag) {
  std::string t = dataset_tag;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "sha") return 4;
  if (t == "shb") return 3;
  if (t == "qnrf" || t == "ucf_qnrf") return 6;
  if (t == "sha+shb") return 5;
  return std::nullopt;
}

}  // namespace gbdomain
