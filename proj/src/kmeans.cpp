#include "gbdomain/kmeans.hpp"

#include "gbdomain/rng.hpp"

#include <limits>
#include <vector>

namespace gbdomain {

namespace {

struct Run {
  Labels labels;
  Matrix centers;
  double inertia = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

double sq_dist(const Eigen::Ref<const Points>& x, Index i, const Matrix& centers, Index k) {
  return (x.row(i) - centers.row(k)).squaredNorm();
}

// Nearest center for every point; ties go to the lower center index.
Labels assign(const Eigen::Ref<const Points>& x, const Matrix& centers) {
  Labels labels(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    Index best = 0;
    double best_d = sq_dist(x, i, centers, 0);
    for (Index k = 1; k < centers.rows(); ++k) {
      const double d = sq_dist(x, i, centers, k);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

Matrix weighted_means(const Eigen::Ref<const Points>& x, const Labels& labels, int k, const Vector& w,
                      std::vector<double>& mass, std::vector<Index>& size) {
  Matrix centers = Matrix::Zero(k, x.cols());
  mass.assign(static_cast<std::size_t>(k), 0.0);
  size.assign(static_cast<std::size_t>(k), 0);
  for (Index i = 0; i < x.rows(); ++i) {
    const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    centers.row(static_cast<Index>(c)) += w(i) * x.row(i);
    mass[c] += w(i);
    ++size[c];
  }
  for (int c = 0; c < k; ++c)
    if (mass[static_cast<std::size_t>(c)] > 0.0) centers.row(c) /= mass[static_cast<std::size_t>(c)];
  return centers;
}

// Means of the current labels; empty clusters take the point farthest from
// its own center (drawn from a cluster with more than one member).
Matrix update_centers(const Eigen::Ref<const Points>& x, Labels& labels, int k, const Vector& w) {
  std::vector<double> mass;
  std::vector<Index> size;
  Matrix centers = weighted_means(x, labels, k, w, mass, size);
  for (int c = 0; c < k; ++c) {
    if (size[static_cast<std::size_t>(c)] > 0) continue;
    Index far = -1;
    double far_d = -1.0;
    for (Index i = 0; i < x.rows(); ++i) {
      const int own = labels[static_cast<std::size_t>(i)];
      if (size[static_cast<std::size_t>(own)] <= 1) continue;
      const double d = sq_dist(x, i, centers, own);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    labels[static_cast<std::size_t>(far)] = c;
    centers = weighted_means(x, labels, k, w, mass, size);
  }
  return centers;
}

Matrix seed_plus_plus(const Eigen::Ref<const Points>& x, int k, const Vector& w, Rng& rng) {
  const Index m = x.rows();
  Matrix centers(k, x.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(m), false);

  auto draw = [&](const Vector& score) -> Index {
    const double total = score.sum();
    if (!(total > 0.0)) {
      // all remaining mass is zero: pick uniformly among unchosen points
      std::vector<Index> free;
      for (Index i = 0; i < m; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) free.push_back(i);
      return free[rng.below(free.size())];
    }
    double target = rng.uniform() * total;
    for (Index i = 0; i < m; ++i) {
      target -= score(i);
      if (target < 0.0 && score(i) > 0.0) return i;
    }
    for (Index i = m - 1; i >= 0; --i)
      if (score(i) > 0.0) return i;
    return 0;
  };

  Index first = draw(w);
  chosen[static_cast<std::size_t>(first)] = true;
  centers.row(0) = x.row(first);
  Vector closest(m);
  for (Index i = 0; i < m; ++i) closest(i) = sq_dist(x, i, centers, 0);
  for (int c = 1; c < k; ++c) {
    Vector score = w.cwiseProduct(closest);
    for (Index i = 0; i < m; ++i)
      if (chosen[static_cast<std::size_t>(i)]) score(i) = 0.0;
    const Index pick = draw(score);
    chosen[static_cast<std::size_t>(pick)] = true;
    centers.row(c) = x.row(pick);
    for (Index i = 0; i < m; ++i) closest(i) = std::min(closest(i), sq_dist(x, i, centers, c));
  }
  return centers;
}

Run lloyd(const Eigen::Ref<const Points>& x, int k, const Vector& w, Matrix centers, const KMeansOptions& opt) {
  Run run;
  run.labels = assign(x, centers);
  double prev = std::numeric_limits<double>::infinity();
  for (run.iterations = 1; run.iterations <= opt.max_iter; ++run.iterations) {
    centers = update_centers(x, run.labels, k, w);
    Labels next = assign(x, centers);
    double inertia = 0.0;
    for (Index i = 0; i < x.rows(); ++i) inertia += w(i) * sq_dist(x, i, centers, next[static_cast<std::size_t>(i)]);
    const bool same = next == run.labels;
    run.labels = std::move(next);
    if (same || std::abs(prev - inertia) <= opt.tol * std::max(prev, 1e-300)) break;
    prev = inertia;
  }
  run.iterations = std::min(run.iterations, opt.max_iter);
  run.centers = update_centers(x, run.labels, k, w);
  run.inertia = 0.0;
  for (Index i = 0; i < x.rows(); ++i)
    run.inertia += w(i) * sq_dist(x, i, run.centers, run.labels[static_cast<std::size_t>(i)]);
  return run;
}

}  // namespace

KMeansResult kmeans(const Eigen::Ref<const Points>& points, int k, std::uint64_t rng_seed, const KMeansOptions& options,
                    const std::optional<Vector>& weights) {
  require(k >= 1, ErrorCode::InvalidArgument, "K must be at least 1");
  require(points.rows() >= k, ErrorCode::Precondition, "insufficient points");
  require(points.cols() >= 1, ErrorCode::InvalidArgument, "points have zero dimensions");
  require(points.allFinite(), ErrorCode::NonFinite, "non-finite points");
  require(options.n_init >= 1 && options.max_iter >= 1, ErrorCode::InvalidArgument, "n_init and max_iter must be positive");
  Vector w = weights.value_or(Vector::Ones(points.rows()));
  require(w.size() == points.rows() && w.allFinite() && (w.array() > 0.0).all(), ErrorCode::InvalidArgument,
          "point weights must be positive and match the point count");

  Run best;
  for (int r = 0; r < options.n_init; ++r) {
    Rng rng = Rng::stream(rng_seed, static_cast<std::uint64_t>(r));
    Run run = lloyd(points, k, w, seed_plus_plus(points, k, w, rng), options);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return KMeansResult{std::move(best.labels), std::move(best.centers), best.inertia, best.iterations};
}

}  // namespace gbdomain
