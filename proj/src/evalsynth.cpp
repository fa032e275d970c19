#include "gbdomain/evalsynth.hpp"

#include "gbdomain/discover.hpp"
#include "gbdomain/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace gbdomain {

namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

StratificationReport count_stratification(const Labels& labels, const Eigen::Ref<const Vector>& gt_counts, int k) {
  require(k >= 1, ErrorCode::InvalidArgument, "K must be at least 1");
  require(static_cast<Index>(labels.size()) == gt_counts.size(), ErrorCode::InvalidArgument,
          "labels and counts differ in length");
  std::vector<std::vector<double>> groups(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < k, ErrorCode::InvalidArgument, "label out of range [0, K)");
    groups[static_cast<std::size_t>(labels[i])].push_back(gt_counts(static_cast<Index>(i)));
  }
  std::string empty;
  for (int d = 0; d < k; ++d)
    if (groups[static_cast<std::size_t>(d)].empty()) empty += (empty.empty() ? "" : ",") + std::to_string(d);
  require(empty.empty(), ErrorCode::Precondition, "empty pseudo-domains: " + empty);

  StratificationReport r;
  r.medians.resize(k);
  for (int d = 0; d < k; ++d) {
    auto& g = groups[static_cast<std::size_t>(d)];
    const std::size_t mid = (g.size() - 1) / 2;  // lower median
    std::nth_element(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(mid), g.end());
    r.medians(d) = g[mid];
  }
  r.delta_med = r.medians.maxCoeff() - r.medians.minCoeff();
  r.sigma_med = std::sqrt((r.medians.array() - r.medians.mean()).square().mean());
  return r;
}

double adjusted_rand_index(const Labels& a, const Labels& b) {
  require(a.size() == b.size(), ErrorCode::InvalidArgument, "label vectors differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, c] : cells) index += choose2(c);
  for (const auto& [key, c] : rows) sum_a += choose2(c);
  for (const auto& [key, c] : cols) sum_b += choose2(c);
  const double expected = sum_a * sum_b / choose2(n);
  const double maximum = 0.5 * (sum_a + sum_b);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

double label_churn(std::span<const PseudoDomainAssignment> aligned_epochs) {
  require(aligned_epochs.size() >= 2, ErrorCode::Precondition, "churn needs at least two epochs");
  double total = 0.0;
  for (std::size_t e = 1; e < aligned_epochs.size(); ++e) {
    const auto& prev = aligned_epochs[e - 1];
    const auto& cur = aligned_epochs[e];
    require(cur.permutation_applied.has_value(), ErrorCode::Precondition,
            "epoch " + std::to_string(e) + " is not aligned (no permutation metadata)");
    require(cur.labels.size() == prev.labels.size() && !cur.labels.empty(), ErrorCode::Precondition,
            "epochs differ in sample count");
    std::size_t changed = 0;
    for (std::size_t i = 0; i < cur.labels.size(); ++i) changed += cur.labels[i] != prev.labels[i];
    total += static_cast<double>(changed) / static_cast<double>(cur.labels.size());
  }
  return total / static_cast<double>(aligned_epochs.size() - 1);
}

PseudoDomainAssignment random_partition(Index n, int k, std::uint64_t rng_seed) {
  require(k >= 1, ErrorCode::InvalidArgument, "K must be at least 1");
  require(n >= k, ErrorCode::Precondition, "need at least K samples");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(rng_seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  PseudoDomainAssignment a;
  a.k = k;
  a.source = AssignmentSource::RandomBaseline;
  a.labels.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    a.labels[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return a;
}

PseudoDomainAssignment flat_kmeans_partition(const Points& descriptors, int k, std::optional<Index> pca_d,
                                             std::uint64_t rng_seed, const KMeansOptions& options) {
  require(k >= 1, ErrorCode::InvalidArgument, "K must be at least 1");
  require(descriptors.rows() >= k, ErrorCode::Precondition, "need at least K samples");
  PseudoDomainAssignment a;
  a.k = k;
  a.source = AssignmentSource::FlatKMeansBaseline;
  if (descriptors.rows() == 1) {
    a.labels = {0};
    return a;
  }
  a.labels = sample_kmeans_labels(reduce_descriptors(descriptors, pca_d), k, rng_seed, options);
  return a;
}

void SynthSpec::validate() const {
  require(!domains.empty(), ErrorCode::InvalidArgument, "at least one domain is required");
  const Index dim = domains.front().center.size();
  require(dim >= 1, ErrorCode::InvalidArgument, "domain centers must be nonempty");
  for (const auto& d : domains) {
    require(d.center.size() == dim && d.center.allFinite(), ErrorCode::InvalidArgument, "inconsistent domain centers");
    require(d.count >= 1, ErrorCode::InvalidArgument, "every domain needs at least one sample");
    require(d.scale >= 0.0 && d.count_regime >= 0.0, ErrorCode::InvalidArgument, "scales and count regimes must be >= 0");
  }
  require(outlier_fraction >= 0.0 && outlier_fraction < 1.0, ErrorCode::InvalidArgument,
          "outlier_fraction must lie in [0, 1)");
  require(count_log_sigma >= 0.0 && outlier_box_inflation >= 0.0, ErrorCode::InvalidArgument,
          "spreads must be nonnegative");
}

SynthSpec make_mixture_spec(int k, Index dim, Index per_domain, double separation, std::uint64_t rng_seed,
                            double outlier_fraction, double base_count, double count_ratio) {
  require(k >= 1 && dim >= 1 && per_domain >= 1, ErrorCode::InvalidArgument, "invalid mixture shape");
  Rng rng = Rng::stream(rng_seed, 0xC3);
  SynthSpec spec;
  spec.rng_seed = rng_seed;
  spec.outlier_fraction = outlier_fraction;
  std::vector<Vector> centers(static_cast<std::size_t>(k), Vector::Zero(dim));
  for (auto& c : centers)
    for (Index j = 0; j < dim; ++j) c(j) = rng.normal();
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < centers.size(); ++a)
    for (std::size_t b = a + 1; b < centers.size(); ++b) closest = std::min(closest, (centers[a] - centers[b]).norm());
  const double rescale = (k > 1 && closest > 0.0) ? separation / closest : 1.0;
  for (int d = 0; d < k; ++d) {
    DomainSpec ds;
    ds.center = centers[static_cast<std::size_t>(d)] * rescale;
    ds.scale = 1.0;
    ds.count = per_domain;
    ds.count_regime = base_count * std::pow(count_ratio, d);
    spec.domains.push_back(std::move(ds));
  }
  return spec;
}

SynthData generate_mixture(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.rng_seed);
  const Index dim = spec.domains.front().center.size();
  Index inliers = 0;
  for (const auto& d : spec.domains) inliers += d.count;
  const auto outliers = static_cast<Index>(
      std::llround(spec.outlier_fraction * static_cast<double>(inliers) / (1.0 - spec.outlier_fraction)));
  const Index n = inliers + outliers;

  Points z(n, dim);
  Vector counts(n);
  Labels truth(static_cast<std::size_t>(n), -1);
  auto draw_count = [&](double regime) {
    return regime * std::exp(spec.count_log_sigma * rng.normal() - 0.5 * spec.count_log_sigma * spec.count_log_sigma);
  };

  Index row = 0;
  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    const auto& ds = spec.domains[d];
    for (Index s = 0; s < ds.count; ++s, ++row) {
      for (Index j = 0; j < dim; ++j) z(row, j) = ds.center(j) + ds.scale * rng.normal();
      counts(row) = draw_count(ds.count_regime);
      truth[static_cast<std::size_t>(row)] = static_cast<int>(d);
    }
  }
  if (outliers > 0) {
    const Eigen::RowVectorXd lo = z.topRows(inliers).colwise().minCoeff();
    const Eigen::RowVectorXd hi = z.topRows(inliers).colwise().maxCoeff();
    const Eigen::RowVectorXd pad = spec.outlier_box_inflation * (hi - lo);
    for (; row < n; ++row) {
      for (Index j = 0; j < dim; ++j) z(row, j) = rng.uniform(lo(j) - pad(j), hi(j) + pad(j));
      const auto& ds = spec.domains[rng.below(spec.domains.size())];
      counts(row) = draw_count(ds.count_regime);
    }
  }
  SynthData out{DescriptorSet(std::move(z), {}, std::move(counts), truth), truth};
  return out;
}

Points apply_drift(const Points& x, int epoch, double drift_sigma, std::uint64_t rng_seed) {
  require(drift_sigma >= 0.0 && std::isfinite(drift_sigma), ErrorCode::InvalidArgument,
          "drift_sigma must be finite and nonnegative");
  if (drift_sigma == 0.0 || x.rows() == 0) return x;
  Rng rng = Rng::stream(rng_seed, static_cast<std::uint64_t>(epoch));
  const Index dim = x.cols();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double sigma_data = std::sqrt((x.rowwise() - mean).array().square().colwise().mean().mean());
  const double shift_sd = drift_sigma * sigma_data;

  Points out = x;
  if (dim >= 2) {
    const double angle = rng.normal(0.0, drift_sigma);
    const auto a = static_cast<Index>(rng.below(static_cast<std::uint64_t>(dim)));
    auto b = static_cast<Index>(rng.below(static_cast<std::uint64_t>(dim - 1)));
    if (b >= a) ++b;
    const double c = std::cos(angle), s = std::sin(angle);
    for (Index i = 0; i < x.rows(); ++i) {
      const double u = x(i, a) - mean(a), v = x(i, b) - mean(b);
      out(i, a) = mean(a) + c * u - s * v;
      out(i, b) = mean(b) + s * u + c * v;
    }
  }
  Eigen::RowVectorXd shift(dim);
  for (Index j = 0; j < dim; ++j) shift(j) = rng.normal(0.0, shift_sd);
  out.rowwise() += shift;
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = 0; j < dim; ++j) out(i, j) += rng.normal(0.0, 0.5 * shift_sd);
  return out;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::InvalidArgument, "need at least two (x, y) pairs");
  Vector lx(static_cast<Index>(x.size())), ly(static_cast<Index>(y.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, ErrorCode::InvalidArgument, "log-log fit needs positive values");
    lx(static_cast<Index>(i)) = std::log(x[i]);
    ly(static_cast<Index>(i)) = std::log(y[i]);
  }
  const Vector cx = lx.array() - lx.mean();
  const double denom = cx.squaredNorm();
  require(denom > 0.0, ErrorCode::InvalidArgument, "x values must not all be equal");
  return cx.dot(ly.array().matrix() - Vector::Constant(ly.size(), ly.mean())) / denom;
}

std::string to_string(PartitionMethod m) {
  switch (m) {
    case PartitionMethod::GbDiscovery: return "gb";
    case PartitionMethod::FlatKMeans: return "flat";
    case PartitionMethod::Random: return "random";
  }
  return "unknown";
}

PartitionMethod method_from_string(const std::string& name) {
  if (name == "gb") return PartitionMethod::GbDiscovery;
  if (name == "flat") return PartitionMethod::FlatKMeans;
  if (name == "random") return PartitionMethod::Random;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + name + "'");
}

StabilityTrial stability_trial(const SynthData& data, PartitionMethod method, int epochs, double drift_sigma,
                               const DiscoverParams& params) {
  require(epochs >= 1, ErrorCode::InvalidArgument, "need at least one epoch");
  require(data.set.counts().has_value(), ErrorCode::Precondition, "synthetic data carries no counts");
  StabilityTrial out;
  Points x = data.set.matrix();
  const std::uint64_t drift_seed = Rng::derive(params.rng_seed, 0xd21f7ULL);
  for (int e = 0; e < epochs; ++e) {
    if (e > 0) x = apply_drift(x, e, drift_sigma, drift_seed);
    const std::uint64_t seed = Rng::derive(params.rng_seed, static_cast<std::uint64_t>(e));
    PseudoDomainAssignment a;
    switch (method) {
      case PartitionMethod::GbDiscovery: {
        DiscoverParams p = params;
        p.rng_seed = seed;
        p.epoch = e;
        a = discover(x, p).assignment;
        break;
      }
      case PartitionMethod::FlatKMeans:
        a = flat_kmeans_partition(x, params.k, params.pca_d, seed, params.kmeans);
        break;
      case PartitionMethod::Random:
        a = random_partition(x.rows(), params.k, seed);
        break;
    }
    a.epoch = e;
    if (e > 0) a = align_labels(a, out.epochs.back());
    out.epochs.push_back(std::move(a));
  }
  out.churn = epochs >= 2 ? label_churn(out.epochs) : 0.0;
  out.stratification = count_stratification(out.epochs.front().labels, *data.set.counts(), params.k);
  out.ari_epoch0 = adjusted_rand_index(out.epochs.front().labels, data.true_labels);
  return out;
}

}  // namespace gbdomain
