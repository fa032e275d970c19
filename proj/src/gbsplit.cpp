#include "gbdomain/gbsplit.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace gbdomain {

namespace {

// Squared distance under per-dimension multipliers (w^beta during assignment).
inline double scaled_sq(const Points& z, Index i, const Vector& c, const Vector& scale) {
  return (scale.array() * (z.row(i).transpose() - c).array().square()).sum();
}

Vector member_mean(const Points& z, std::span<const Index> idx) {
  Vector m = Vector::Zero(z.cols());
  for (Index i : idx) m += z.row(i).transpose();
  return m / static_cast<double>(idx.size());
}

bool worse(double candidate, double reference) {
  return candidate > reference + 1e-12 * std::max(1.0, std::abs(reference));
}

struct State {
  std::vector<unsigned char> label;  // 0 or 1 per member position
  Vector c[2];
  WeightVector w;
  double objective = std::numeric_limits<double>::infinity();
};

// Centroids and scatters for the current labels.
void centroids_and_scatter(const Points& z, std::span<const Index> members, const std::vector<unsigned char>& label,
                           Vector (&c)[2], Vector& scatter) {
  const Index d = z.cols();
  c[0] = Vector::Zero(d);
  c[1] = Vector::Zero(d);
  Index count[2] = {0, 0};
  for (std::size_t p = 0; p < members.size(); ++p) {
    c[label[p]] += z.row(members[p]).transpose();
    ++count[label[p]];
  }
  for (int k = 0; k < 2; ++k) c[k] /= static_cast<double>(count[k]);
  scatter = Vector::Zero(d);
  for (std::size_t p = 0; p < members.size(); ++p)
    scatter.array() += (z.row(members[p]).transpose() - c[label[p]]).array().square();
}

// Moves the member farthest from the populated centroid into an empty cluster.
void repair_empty(const Points& z, std::span<const Index> members, std::vector<unsigned char>& label, const Vector (&c)[2],
                  const Vector& scale) {
  std::size_t count1 = std::count(label.begin(), label.end(), 1);
  if (count1 != 0 && count1 != label.size()) return;
  const unsigned char full = count1 == 0 ? 0 : 1;
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t p = 0; p < members.size(); ++p) {
    const double dd = scaled_sq(z, members[p], c[full], scale);
    if (dd > best_d || (dd == best_d && members[p] < members[best])) {
      best_d = dd;
      best = p;
    }
  }
  label[best] = static_cast<unsigned char>(1 - full);
}

// Alternating updates from the given centroids and weights. Rounds that would
// raise the objective are discarded and end the loop.
int alternate(const Points& z, std::span<const Index> members, const SplitOptions& opt, State& s,
              std::vector<double>& trace, int budget) {
  const std::size_t n = members.size();
  std::vector<unsigned char> label(n, 0);
  Vector c[2];
  Vector scatter;
  int rounds = 0;
  bool first = s.label.empty();
  for (; rounds < budget; ++rounds) {
    const Vector scale = s.w.values().array().pow(opt.beta).matrix();
    bool changed = first;
    for (std::size_t p = 0; p < n; ++p) {
      const double d0 = scaled_sq(z, members[p], s.c[0], scale);
      const double d1 = scaled_sq(z, members[p], s.c[1], scale);
      label[p] = d1 < d0 ? 1 : 0;
    }
    repair_empty(z, members, label, s.c, scale);
    if (!first) changed = label != s.label;

    centroids_and_scatter(z, members, label, c, scatter);
    WeightVector w = update_weights(scatter, opt.beta, opt.eps);
    const double obj = (w.values().array().pow(opt.beta) * scatter.array()).sum();
    if (!first && worse(obj, s.objective)) break;

    const double prev = s.objective;
    s.label = label;
    s.c[0] = c[0];
    s.c[1] = c[1];
    s.w = std::move(w);
    s.objective = obj;
    trace.push_back(obj);
    if (!first && (!changed || std::abs(prev - obj) <= opt.tol * std::max(std::abs(prev), 1e-300))) {
      ++rounds;
      break;
    }
    first = false;
  }
  return rounds;
}

// Best threshold along the centroid axis under the current metric. Returns
// true and overwrites `label` when it beats `current`.
bool axis_sweep(const Points& z, std::span<const Index> members, const State& s, double beta,
                std::vector<unsigned char>& label) {
  const std::size_t n = members.size();
  const Index d = z.cols();
  const Vector scale = s.w.values().array().pow(beta).matrix();
  const Vector axis = (scale.array() * (s.c[1] - s.c[0]).array()).matrix();
  if (axis.squaredNorm() == 0.0) return false;

  const Vector mean = member_mean(z, members);
  std::vector<std::pair<double, std::size_t>> proj(n);
  for (std::size_t p = 0; p < n; ++p) proj[p] = {(z.row(members[p]).transpose() - mean).dot(axis), p};
  std::sort(proj.begin(), proj.end(), [&](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && members[a.second] < members[b.second]);
  });

  // prefix sums of centered coordinates
  Vector total_sum = Vector::Zero(d), total_sq = Vector::Zero(d);
  for (std::size_t p = 0; p < n; ++p) {
    const Vector x = z.row(members[p]).transpose() - mean;
    total_sum += x;
    total_sq.array() += x.array().square();
  }
  Vector left_sum = Vector::Zero(d), left_sq = Vector::Zero(d);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t k = 1; k < n; ++k) {
    const Vector x = z.row(members[proj[k - 1].second]).transpose() - mean;
    left_sum += x;
    left_sq.array() += x.array().square();
    const double nl = static_cast<double>(k), nr = static_cast<double>(n - k);
    const Vector right_sum = total_sum - left_sum;
    const Vector sse = (left_sq.array() - left_sum.array().square() / nl + (total_sq - left_sq).array() -
                        right_sum.array().square() / nr)
                           .max(0.0)
                           .matrix();
    const double obj = scale.dot(sse);
    if (obj < best) {
      best = obj;
      best_k = k;
    }
  }
  if (best_k == 0) return false;
  // Require a clear gain over the incumbent so float noise cannot cycle.
  if (!(best < s.objective - 1e-10 * std::max(1.0, s.objective))) return false;
  label.assign(n, 1);
  for (std::size_t k = 0; k < best_k; ++k) label[proj[k].second] = 0;
  return true;
}

}  // namespace

WeightVector::WeightVector(Vector w) : w_(std::move(w)) {
  require(w_.size() >= 1, ErrorCode::InvalidArgument, "weight vector must be nonempty");
  require(w_.allFinite() && (w_.array() >= 0.0).all(), ErrorCode::InvalidArgument,
          "weights must be finite and nonnegative");
  require(std::abs(w_.sum() - 1.0) <= 1e-9, ErrorCode::InvalidArgument, "weights must sum to 1");
}

WeightVector WeightVector::uniform(Index d) {
  require(d >= 1, ErrorCode::InvalidArgument, "weight vector must be nonempty");
  return WeightVector(Vector::Constant(d, 1.0 / static_cast<double>(d)));
}

SeedPair farthest_pair_seed(const Points& z, std::span<const Index> members, const WeightVector& w,
                            std::uint64_t /*rng_seed*/) {
  require(members.size() >= 2, ErrorCode::Precondition, "unsplittable: fewer than two points");
  require(w.size() == z.cols(), ErrorCode::InvalidArgument, "weight dimension mismatch");
  const Vector& scale = w.values();

  auto farthest_from = [&](const Vector& c) {
    Index best = -1;
    double best_d = -1.0;
    for (Index i : members) {
      const double dd = scaled_sq(z, i, c, scale);
      if (dd > best_d || (dd == best_d && i < best)) {
        best_d = dd;
        best = i;
      }
    }
    return std::pair{best, best_d};
  };

  SeedPair seeds;
  seeds.first = farthest_from(member_mean(z, members)).first;
  const auto [second, dist] = farthest_from(z.row(seeds.first).transpose());
  seeds.second = second;
  seeds.degenerate = !(dist > 0.0);
  return seeds;
}

WeightVector update_weights(const Eigen::Ref<const Vector>& scatters, double beta, double eps) {
  require(beta > 1.0, ErrorCode::InvalidArgument, "beta must exceed 1");
  require(eps > 0.0, ErrorCode::InvalidArgument, "eps must be positive");
  require(scatters.size() >= 1, ErrorCode::InvalidArgument, "empty scatter vector");
  require(scatters.allFinite() && (scatters.array() >= 0.0).all(), ErrorCode::InvalidArgument,
          "scatters must be finite and nonnegative");
  const Index d = scatters.size();
  if ((scatters.array() == 0.0).all()) return WeightVector::uniform(d);

  // w_j = 1 / sum_t ((D_j+eps)/(D_t+eps))^(1/(beta-1)), evaluated in log space
  const double a = 1.0 / (beta - 1.0);
  Vector logit = Vector::Constant(d, -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < d; ++j) {
    if (scatters(j) > 0.0) {
      logit(j) = -a * std::log(scatters(j) + eps);
      top = std::max(top, logit(j));
    }
  }
  Vector w = Vector::Zero(d);
  for (Index j = 0; j < d; ++j)
    if (scatters(j) > 0.0) w(j) = std::exp(logit(j) - top);
  w /= w.sum();
  return WeightVector(std::move(w));
}

Vector within_scatter(const Points& z, std::span<const Index> left, std::span<const Index> right) {
  require(!left.empty() && !right.empty(), ErrorCode::Precondition, "both clusters must be nonempty");
  Vector scatter = Vector::Zero(z.cols());
  for (auto part : {left, right}) {
    const Vector c = member_mean(z, part);
    for (Index i : part) scatter.array() += (z.row(i).transpose() - c).array().square();
  }
  return scatter;
}

double split_objective(const Points& z, std::span<const Index> left, std::span<const Index> right,
                       const WeightVector& w, double beta) {
  require(w.size() == z.cols(), ErrorCode::InvalidArgument, "weight dimension mismatch");
  return (w.values().array().pow(beta) * within_scatter(z, left, right).array()).sum();
}

SplitResult weighted_2means(const Points& z, std::span<const Index> members, const SplitOptions& options) {
  require(options.beta > 1.0, ErrorCode::InvalidArgument, "beta must exceed 1");
  require(options.max_iter >= 1, ErrorCode::InvalidArgument, "max_iter must be positive");
  require(members.size() >= 2, ErrorCode::Precondition, "unsplittable: fewer than two points");

  State s;
  s.w = WeightVector::uniform(z.cols());
  const SeedPair seeds = farthest_pair_seed(z, members, s.w, options.rng_seed);
  require(!seeds.degenerate, ErrorCode::Precondition, "unsplittable: zero-diameter ball");
  s.c[0] = z.row(seeds.first).transpose();
  s.c[1] = z.row(seeds.second).transpose();

  SplitResult result;
  int used = alternate(z, members, options, s, result.objective_trace, options.max_iter);

  if (options.refine) {
    std::vector<unsigned char> label;
    while (used < options.max_iter && axis_sweep(z, members, s, options.beta, label)) {
      Vector c[2];
      Vector scatter;
      centroids_and_scatter(z, members, label, c, scatter);
      WeightVector w = update_weights(scatter, options.beta, options.eps);
      const double obj = (w.values().array().pow(options.beta) * scatter.array()).sum();
      if (worse(obj, s.objective)) break;
      s.label = std::move(label);
      s.c[0] = c[0];
      s.c[1] = c[1];
      s.w = std::move(w);
      s.objective = obj;
      result.objective_trace.push_back(obj);
      ++used;
      used += alternate(z, members, options, s, result.objective_trace, options.max_iter - used);
    }
  }

  const Index lowest = *std::min_element(members.begin(), members.end());
  unsigned char left_label = 0;
  for (std::size_t p = 0; p < members.size(); ++p)
    if (members[p] == lowest) left_label = s.label[p];
  for (std::size_t p = 0; p < members.size(); ++p)
    (s.label[p] == left_label ? result.left : result.right).push_back(members[p]);

  result.left_centroid = s.c[left_label];
  result.right_centroid = s.c[1 - left_label];
  result.weight = std::move(s.w);
  result.objective = s.objective;
  result.iterations = used;
  return result;
}

}  // namespace gbdomain
