#include "doctest.h"

#include "gbdomain/gbdivide.hpp"
#include "oracles.hpp"

#include "json.hpp"

#include <limits>
#include <random>
#include <set>

using namespace gbdomain;

namespace {

IndexList all(Index n) {
  IndexList v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

Points two_blobs(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 0.1);
  Points p(40, 2);
  for (Index i = 0; i < 40; ++i) p.row(i) << (i < 20 ? 0.0 : 10.0) + nd(gen), nd(gen);
  return p;
}

void check_partition(const BallSet& bs) {
  std::vector<int> seen(static_cast<std::size_t>(bs.n), 0);
  for (const auto& b : bs.balls)
    for (Index i : b.indices) ++seen[static_cast<std::size_t>(i)];
  for (int s : seen) CHECK(s == 1);
}

}  // namespace

TEST_SUITE("gbdivide") {

TEST_CASE("dm examples") {
  Points p(2, 1);
  p << 0, 2;
  const IndexList both{0, 1}, one{0};
  CHECK(dm(p, one, WeightVector::uniform(1)) == 0.0);
  CHECK(dm(p, both, WeightVector::uniform(1)) == doctest::Approx(1.0));
  CHECK(dm(p * 3.0, both, WeightVector::uniform(1)) == doctest::Approx(3.0));
  CHECK_THROWS_AS(dm(p, IndexList{}, WeightVector::uniform(1)), Error);
}

TEST_CASE("child_dm examples") {
  Points p(4, 1);
  p << 5, 0, 2, 4;  // dm({5}) = 0, dm({0,2,4}) = 4/3
  const IndexList a{0}, b{1, 2, 3};
  const auto w = WeightVector::uniform(1);
  const double db = dm(p, b, w);
  CHECK(child_dm(p, a, b, w) == doctest::Approx(0.75 * db));
  CHECK(child_dm(p, a, b, w) <= std::max(dm(p, a, w), db));

  // the |B1|=1, |B2|=3, dm 0 and 2 case
  Points q(4, 1);
  q << 7, 0, 3, 6;  // center 3, deviations 3,0,3 -> dm 2
  CHECK(dm(q, b, w) == doctest::Approx(2.0));
  CHECK(child_dm(q, a, b, w) == doctest::Approx(1.5));

  Points r(4, 1);
  r << 0, 2, 10, 12;
  CHECK(child_dm(r, IndexList{0, 1}, IndexList{2, 3}, w) == doctest::Approx(1.0));
  CHECK_THROWS_AS(child_dm(r, IndexList{}, IndexList{2, 3}, w), Error);
}

TEST_CASE("tau = 0 keeps the root") {
  std::mt19937_64 gen(1);
  const Points p = oracle::gaussian(100, 4, gen);
  DivisionParams params;
  params.tau = 0.0;
  const BallSet bs = divide(p, params);
  REQUIRE(bs.balls.size() == 1);
  CHECK(bs.balls[0].indices.size() == 100);
  CHECK(bs.balls[0].reason == LeafReason::Rejected);
}

TEST_CASE("tau = inf divides down to singletons or coincident points") {
  std::mt19937_64 gen(2);
  Points p = oracle::gaussian(60, 3, gen);
  p.row(5) = p.row(6);  // one coincident pair
  DivisionParams params;
  params.tau = std::numeric_limits<double>::infinity();
  params.d_max = std::numeric_limits<int>::max();
  params.min_ball = 2;
  const BallSet bs = divide(p, params);
  check_partition(bs);
  for (const auto& b : bs.balls) {
    const bool single = b.indices.size() == 1;
    CHECK((single || b.reason == LeafReason::Unsplittable));
  }
}

TEST_CASE("two blobs") {
  const Points p = two_blobs(3);
  DivisionParams params;
  params.d_max = 1;
  BallSet bs = divide(p, params);
  REQUIRE(bs.balls.size() == 2);
  CHECK(bs.balls[0].indices == IndexList(all(20)));
  IndexList second(20);
  std::iota(second.begin(), second.end(), Index{20});
  CHECK(bs.balls[1].indices == second);

  // the default depth cap keeps refining, but no leaf mixes the blobs
  bs = divide(p, DivisionParams{});
  for (const auto& b : bs.balls) {
    const bool low = b.indices.front() < 20;
    for (Index i : b.indices) CHECK((i < 20) == low);
  }
}

TEST_CASE("ball invariants") {
  std::mt19937_64 gen(4);
  const Points p = oracle::gaussian(300, 5, gen);
  DivisionParams params;
  params.d_max = 6;
  const BallSet bs = divide(p, params);
  check_partition(bs);
  Index last_id = -1;
  for (const auto& b : bs.balls) {
    CHECK(b.ball_id > last_id);
    last_id = b.ball_id;
    Vector mean = Vector::Zero(5);
    for (Index i : b.indices) mean += p.row(i).transpose();
    mean /= static_cast<double>(b.indices.size());
    CHECK((mean - b.center).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(b.compactness == doctest::Approx(dm(p, b.indices, b.weight)).epsilon(1e-9));
    CHECK(b.depth <= params.d_max);
    CHECK(std::is_sorted(b.indices.begin(), b.indices.end()));
    switch (b.reason) {
      case LeafReason::DepthCap: CHECK(b.depth == params.d_max); break;
      case LeafReason::BelowMinBall: CHECK(static_cast<Index>(b.indices.size()) < params.min_ball); break;
      default: break;
    }
  }
}

TEST_CASE("accepted splits satisfy the rule on recomputation") {
  std::mt19937_64 gen(5);
  for (double tau : {0.8, 1.05, 2.0}) {
    const Points p = oracle::gaussian(200, 4, gen);
    DivisionParams params;
    params.tau = tau;
    const BallSet bs = divide(p, params);
    for (const auto& s : bs.splits) {
      CHECK(s.left_id > s.parent.ball_id);
      CHECK(s.right_id == s.left_id + 1);
      const double parent = dm(p, s.parent.indices, s.parent.weight);
      CHECK(s.child_dm < tau * parent);
    }
  }
}

TEST_CASE("thread count does not change the result") {
  std::mt19937_64 gen(6);
  const Points p = oracle::gaussian(800, 8, gen);
  const BallSet a = divide(p, DivisionParams{}, 1);
  const BallSet b = divide(p, DivisionParams{}, 4);
  CHECK(ballset_to_json(a) == ballset_to_json(b));
}

TEST_CASE("single sample and empty input") {
  Points one(1, 3);
  one << 1, 2, 3;
  const BallSet bs = divide(one, DivisionParams{});
  REQUIRE(bs.balls.size() == 1);
  CHECK(bs.balls[0].indices == IndexList{0});
  CHECK_THROWS_WITH(divide(Points(0, 3), DivisionParams{}), "empty dataset");
}

TEST_CASE("parameter validation") {
  DivisionParams p;
  p.tau = -1.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.tau = std::nan("");
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.beta = 1.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.min_ball = 1;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("ball_of_sample and json") {
  const Points p = two_blobs(8);
  DivisionParams params;
  params.d_max = 1;
  const BallSet bs = divide(p, params);
  const auto owner = bs.ball_of_sample();
  const auto leaf = bs.leaf_of_sample();
  for (Index i = 0; i < 40; ++i) {
    CHECK(owner[static_cast<std::size_t>(i)] == bs.balls[static_cast<std::size_t>(leaf[static_cast<std::size_t>(i)])].ball_id);
  }
  const auto j = nlohmann::json::parse(ballset_to_json(bs));
  REQUIRE(j["balls"].size() == 2);
  for (const char* key : {"ball_id", "depth", "center", "weight", "compactness", "indices"})
    CHECK(j["balls"][0].contains(key));
}

}
