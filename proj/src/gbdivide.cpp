#include "gbdomain/gbdivide.hpp"

#include "parallel.hpp"

#include "json.hpp"

#include <cmath>
#include <optional>

namespace gbdomain {

namespace {

Vector member_mean(const Points& z, std::span<const Index> idx) {
  Vector m = Vector::Zero(z.cols());
  for (Index i : idx) m += z.row(i).transpose();
  return m / static_cast<double>(idx.size());
}

GranularBall make_ball(const Points& z, Index id, IndexList indices, WeightVector w, int depth) {
  GranularBall b;
  b.ball_id = id;
  b.center = member_mean(z, indices);
  b.compactness = dm(z, indices, w);
  b.indices = std::move(indices);
  b.weight = std::move(w);
  b.depth = depth;
  return b;
}

struct Attempt {
  LeafReason reason = LeafReason::Rejected;
  bool accepted = false;
  std::optional<SplitResult> split;
  double child = 0.0;
};

Attempt try_split(const Points& z, const GranularBall& ball, const DivisionParams& p) {
  Attempt a;
  if (static_cast<Index>(ball.indices.size()) < p.min_ball) {
    a.reason = LeafReason::BelowMinBall;
    return a;
  }
  if (ball.depth >= p.d_max) {
    a.reason = LeafReason::DepthCap;
    return a;
  }
  SplitOptions opt;
  opt.beta = p.beta;
  opt.eps = p.eps;
  opt.max_iter = p.max_iter;
  opt.tol = p.tol;
  opt.rng_seed = p.rng_seed;
  try {
    a.split = weighted_2means(z, ball.indices, opt);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Precondition) throw;
    a.reason = LeafReason::Unsplittable;
    return a;
  }
  a.child = child_dm(z, a.split->left, a.split->right, a.split->weight);
  a.accepted = a.child < p.tau * ball.compactness;
  a.reason = LeafReason::Rejected;
  return a;
}

}  // namespace

void DivisionParams::validate() const {
  require(!std::isnan(tau) && tau >= 0.0, ErrorCode::InvalidArgument, "tau must be a nonnegative number");
  require(beta > 1.0 && std::isfinite(beta), ErrorCode::InvalidArgument, "beta must be finite and exceed 1");
  require(eps > 0.0 && std::isfinite(eps), ErrorCode::InvalidArgument, "eps must be positive");
  require(d_max >= 0, ErrorCode::InvalidArgument, "d_max must be nonnegative");
  require(min_ball >= 2, ErrorCode::InvalidArgument, "min_ball must be at least 2");
  require(max_iter >= 1, ErrorCode::InvalidArgument, "max_iter must be positive");
}

const char* to_string(LeafReason r) {
  switch (r) {
    case LeafReason::Rejected: return "rejected";
    case LeafReason::DepthCap: return "depth_cap";
    case LeafReason::BelowMinBall: return "below_min_ball";
    case LeafReason::Unsplittable: return "unsplittable";
  }
  return "unknown";
}

std::vector<Index> BallSet::ball_of_sample() const {
  std::vector<Index> out(static_cast<std::size_t>(n), -1);
  for (const auto& b : balls)
    for (Index i : b.indices) out[static_cast<std::size_t>(i)] = b.ball_id;
  return out;
}

std::vector<Index> BallSet::leaf_of_sample() const {
  std::vector<Index> out(static_cast<std::size_t>(n), -1);
  for (std::size_t m = 0; m < balls.size(); ++m)
    for (Index i : balls[m].indices) out[static_cast<std::size_t>(i)] = static_cast<Index>(m);
  return out;
}

double dm(const Points& z, std::span<const Index> members, const WeightVector& w) {
  require(!members.empty(), ErrorCode::Precondition, "dm of an empty ball");
  require(w.size() == z.cols(), ErrorCode::InvalidArgument, "weight dimension mismatch");
  const Vector c = member_mean(z, members);
  double total = 0.0;
  for (Index i : members) total += std::sqrt((w.values().array() * (z.row(i).transpose() - c).array().square()).sum());
  return total / static_cast<double>(members.size());
}

double child_dm(const Points& z, std::span<const Index> b1, std::span<const Index> b2, const WeightVector& w) {
  require(!b1.empty() && !b2.empty(), ErrorCode::Precondition, "child_dm with an empty child");
  const double n1 = static_cast<double>(b1.size()), n2 = static_cast<double>(b2.size());
  return (n1 * dm(z, b1, w) + n2 * dm(z, b2, w)) / (n1 + n2);
}

BallSet divide(const Points& z, const DivisionParams& params, int threads) {
  params.validate();
  require(z.rows() >= 1, ErrorCode::Precondition, "empty dataset");
  require(z.cols() >= 1, ErrorCode::Precondition, "descriptors have zero dimensions");
  require(z.allFinite(), ErrorCode::NonFinite, "non-finite descriptors");

  BallSet out;
  out.n = z.rows();
  out.params = params;

  IndexList all(static_cast<std::size_t>(z.rows()));
  for (Index i = 0; i < z.rows(); ++i) all[static_cast<std::size_t>(i)] = i;
  std::vector<GranularBall> level;
  level.push_back(make_ball(z, 0, std::move(all), WeightVector::uniform(z.cols()), 0));
  Index next_id = 1;

  // Whole FIFO levels at a time: ids come out in the same order as a
  // one-ball-at-a-time queue.
  while (!level.empty()) {
    std::vector<Attempt> attempts(level.size());
    detail::parallel_for(level.size(), threads,
                         [&](std::size_t i) { attempts[i] = try_split(z, level[i], params); });

    std::vector<GranularBall> next;
    for (std::size_t i = 0; i < level.size(); ++i) {
      auto& ball = level[i];
      auto& a = attempts[i];
      if (!a.accepted) {
        ball.reason = a.reason;
        out.balls.push_back(std::move(ball));
        continue;
      }
      SplitRecord rec;
      rec.left_id = next_id++;
      rec.right_id = next_id++;
      rec.child_weight = a.split->weight;
      rec.child_dm = a.child;
      next.push_back(make_ball(z, rec.left_id, std::move(a.split->left), a.split->weight, ball.depth + 1));
      next.push_back(make_ball(z, rec.right_id, std::move(a.split->right), a.split->weight, ball.depth + 1));
      rec.parent = std::move(ball);
      out.splits.push_back(std::move(rec));
    }
    level = std::move(next);
  }

  std::sort(out.balls.begin(), out.balls.end(),
            [](const GranularBall& a, const GranularBall& b) { return a.ball_id < b.ball_id; });
  return out;
}

std::string ballset_to_json(const BallSet& set) {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::ordered_json j;
  j["n"] = set.n;
  j["params"] = {{"tau", std::isinf(set.params.tau) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(set.params.tau)},
                 {"beta", set.params.beta},
                 {"eps", set.params.eps},
                 {"d_max", set.params.d_max},
                 {"min_ball", set.params.min_ball},
                 {"max_iter", set.params.max_iter},
                 {"tol", set.params.tol},
                 {"seed", set.params.rng_seed}};
  auto& balls = j["balls"] = nlohmann::ordered_json::array();
  for (const auto& b : set.balls) {
    nlohmann::ordered_json jb;
    jb["ball_id"] = b.ball_id;
    jb["depth"] = b.depth;
    jb["center"] = vec(b.center);
    jb["weight"] = vec(b.weight.values());
    jb["compactness"] = b.compactness;
    jb["leaf_reason"] = to_string(b.reason);
    jb["indices"] = b.indices;
    balls.push_back(std::move(jb));
  }
  return j.dump();
}

}  // namespace gbdomain
