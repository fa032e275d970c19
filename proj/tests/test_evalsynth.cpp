#include "doctest.h"

#include "gbdomain/evalsynth.hpp"

#include <algorithm>
#include <map>

using namespace gbdomain;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

}  // namespace

TEST_SUITE("evalsynth") {

TEST_CASE("stratification examples") {
  const Vector counts = (Vector(6) << 1, 2, 3, 4, 5, 6).finished();
  auto r = count_stratification({0, 0, 0, 0, 0, 0}, counts, 1);
  CHECK(r.delta_med == 0.0);
  CHECK(r.sigma_med == 0.0);

  const Vector c3 = (Vector(3) << 10, 50, 100).finished();
  r = count_stratification({0, 1, 2}, c3, 3);
  CHECK(r.delta_med == doctest::Approx(90.0));
  CHECK(r.sigma_med == doctest::Approx(36.82).epsilon(1e-3));

  const auto p = count_stratification({2, 0, 1}, c3, 3);
  CHECK(p.delta_med == r.delta_med);
  CHECK(p.sigma_med == doctest::Approx(r.sigma_med));
}

TEST_CASE("lower median for even groups") {
  const Vector c = (Vector(4) << 1, 2, 3, 4).finished();
  CHECK(count_stratification({0, 0, 0, 0}, c, 1).medians(0) == 2.0);
}

TEST_CASE("empty domain is an error") {
  const Vector c = Vector::Ones(3);
  CHECK_THROWS_WITH(count_stratification({0, 0, 2}, c, 3), doctest::Contains("1"));
  CHECK_THROWS_AS(count_stratification({0, 0}, c, 1), Error);
}

TEST_CASE("ari examples") {
  const Labels a{0, 0, 1, 1, 2, 2};
  CHECK(adjusted_rand_index(a, a) == doctest::Approx(1.0));
  CHECK(adjusted_rand_index({0, 0, 0, 0}, {0, 0, 1, 1}) == doctest::Approx(0.0));
  const Labels renamed{2, 2, 0, 0, 1, 1};
  CHECK(adjusted_rand_index(a, renamed) == doctest::Approx(1.0));
  const Labels b{0, 1, 1, 1, 2, 0};
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(adjusted_rand_index(b, a)));
  CHECK_THROWS_AS(adjusted_rand_index(a, {0, 1}), Error);
}

TEST_CASE("ari against a hand contingency table") {
  // table [[2,1],[0,3]]: sum C(n_ij,2)=1+3=4, rows C(3,2)*2=6, cols C(2,2)+C(4,2)=7, C(6,2)=15
  const Labels a{0, 0, 0, 1, 1, 1}, b{0, 0, 1, 1, 1, 1};
  const double expected = 6.0 * 7.0 / 15.0;
  CHECK(adjusted_rand_index(a, b) == doctest::Approx((4.0 - expected) / (6.5 - expected)));
}

TEST_CASE("churn") {
  PseudoDomainAssignment e0{Labels(10, 0), 2};
  PseudoDomainAssignment e1 = e0;
  e1.permutation_applied = std::vector<int>{0, 1};
  std::vector<PseudoDomainAssignment> seq{e0, e1};
  CHECK(label_churn(seq) == 0.0);
  seq[1].labels[3] = 1;
  CHECK(label_churn(seq) == doctest::Approx(0.1));
  seq[1].permutation_applied.reset();
  CHECK_THROWS_AS(label_churn(seq), Error);
  CHECK_THROWS_AS(label_churn(std::span(seq.data(), 1)), Error);
}

TEST_CASE("relabeled epochs have zero churn after alignment") {
  const PseudoDomainAssignment e0{{0, 1, 2, 0, 1, 2, 2}, 3};
  PseudoDomainAssignment raw = e0;
  for (int& l : raw.labels) l = (l + 2) % 3;
  const std::vector<PseudoDomainAssignment> seq{e0, align_labels(raw, e0)};
  CHECK(label_churn(seq) == 0.0);
}

TEST_CASE("random partition sizes") {
  auto sizes = [](const PseudoDomainAssignment& a) {
    std::map<int, int> s;
    for (int l : a.labels) ++s[l];
    std::vector<int> v;
    for (auto [k, c] : s) v.push_back(c);
    std::sort(v.begin(), v.end());
    return v;
  };
  CHECK(sizes(random_partition(6, 3, 1)) == std::vector<int>{2, 2, 2});
  CHECK(sizes(random_partition(7, 3, 1)) == std::vector<int>{2, 2, 3});
  CHECK(random_partition(50, 4, 9).labels == random_partition(50, 4, 9).labels);
  CHECK(random_partition(50, 4, 9).source == AssignmentSource::RandomBaseline);
  CHECK_THROWS_AS(random_partition(2, 3, 0), Error);
}

TEST_CASE("flat K-means baseline") {
  const SynthData data = generate_mixture(make_mixture_spec(3, 8, 60, 8.0, 4));
  const auto a = flat_kmeans_partition(data.set.matrix(), 3, std::nullopt, 0);
  CHECK(a.source == AssignmentSource::FlatKMeansBaseline);
  CHECK(adjusted_rand_index(a.labels, data.true_labels) >= 0.95);
  for (int l : flat_kmeans_partition(data.set.matrix(), 1, std::nullopt, 0).labels) CHECK(l == 0);
  CHECK_THROWS_AS(flat_kmeans_partition(data.set.matrix().topRows(2), 3, std::nullopt, 0), Error);
}

TEST_CASE("generator shape and determinism") {
  const SynthSpec spec = make_mixture_spec(4, 5, 30, 3.0, 7, 0.1);
  const SynthData a = generate_mixture(spec), b = generate_mixture(spec);
  CHECK(a.set.matrix() == b.set.matrix());
  CHECK(*a.set.counts() == *b.set.counts());
  // round(0.1 * 120 / 0.9) = 13 outliers
  CHECK(a.set.size() == 133);
  CHECK(std::count(a.true_labels.begin(), a.true_labels.end(), -1) == 13);
  CHECK(*a.set.domains() == a.true_labels);
  CHECK((a.set.counts()->array() >= 0.0).all());
  CHECK(spec.k_true() == 4);
}

TEST_CASE("closest centers sit at the requested separation") {
  const SynthSpec spec = make_mixture_spec(5, 6, 10, 4.0, 3);
  double closest = INFINITY;
  for (std::size_t i = 0; i < spec.domains.size(); ++i)
    for (std::size_t j = i + 1; j < spec.domains.size(); ++j)
      closest = std::min(closest, (spec.domains[i].center - spec.domains[j].center).norm());
  CHECK(closest == doctest::Approx(4.0));
}

TEST_CASE("count regimes separate the domains") {
  const SynthData data = generate_mixture(make_mixture_spec(3, 4, 200, 6.0, 2));
  const auto r = count_stratification(data.true_labels, *data.set.counts(), 3);
  CHECK(r.medians(0) < r.medians(1));
  CHECK(r.medians(1) < r.medians(2));
}

TEST_CASE("balanced random labels on a single regime are not stratified") {
  std::vector<double> sigmas;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const SynthData data = generate_mixture(make_mixture_spec(1, 4, 400, 1.0, s));
    const auto labels = random_partition(data.set.size(), 4, s).labels;
    sigmas.push_back(count_stratification(labels, *data.set.counts(), 4).sigma_med);
  }
  // the single regime has median count 50; random groups stay within a few percent
  CHECK(median(sigmas) < 2.5);
}

TEST_CASE("spec validation") {
  SynthSpec s = make_mixture_spec(2, 3, 5, 1.0, 0);
  s.outlier_fraction = 1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = make_mixture_spec(2, 3, 5, 1.0, 0);
  s.domains[0].count = 0;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("drift") {
  const SynthData data = generate_mixture(make_mixture_spec(3, 6, 50, 4.0, 1));
  const Points& x = data.set.matrix();
  CHECK(apply_drift(x, 1, 0.0, 5) == x);
  CHECK(apply_drift(x, 3, 0.1, 5) == apply_drift(x, 3, 0.1, 5));
  CHECK(apply_drift(x, 3, 0.1, 5) != apply_drift(x, 4, 0.1, 5));
  CHECK_THROWS_AS(apply_drift(x, 1, -0.1, 5), Error);

  // mean displacement grows with drift_sigma
  double last = 0.0;
  for (double sigma : {0.05, 0.1, 0.2, 0.4}) {
    double total = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) total += (apply_drift(x, 1, sigma, s) - x).rowwise().norm().mean();
    CHECK(total > last);
    last = total;
  }
}

TEST_CASE("stability trial bookkeeping") {
  const SynthData data = generate_mixture(make_mixture_spec(3, 8, 60, 6.0, 3, 0.1));
  DiscoverParams p;
  p.k = 3;
  const auto t = stability_trial(data, PartitionMethod::GbDiscovery, 4, 0.1, p);
  CHECK(t.epochs.size() == 4);
  for (std::size_t e = 1; e < 4; ++e) CHECK(t.epochs[e].permutation_applied.has_value());
  CHECK(t.churn == doctest::Approx(label_churn(t.epochs)));
  CHECK(t.churn >= 0.0);
  CHECK(t.churn <= 1.0);
  const auto again = stability_trial(data, PartitionMethod::GbDiscovery, 4, 0.1, p);
  CHECK(again.churn == t.churn);
  CHECK(method_from_string(to_string(PartitionMethod::FlatKMeans)) == PartitionMethod::FlatKMeans);
  CHECK_THROWS_AS(method_from_string("spectral"), Error);
}

TEST_CASE("loglog slope") {
  const std::vector<double> x{1, 2, 4, 8}, y{3, 6, 12, 24}, y2{1, 4, 16, 64};
  CHECK(loglog_slope(x, y) == doctest::Approx(1.0));
  CHECK(loglog_slope(x, y2) == doctest::Approx(2.0));
}

}
