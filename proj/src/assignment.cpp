#include "gbdomain/assignment.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace gbdomain {

const char* to_string(AssignmentSource s) {
  switch (s) {
    case AssignmentSource::GbRepresentative: return "GB_REPRESENTATIVE";
    case AssignmentSource::FallbackSampleKMeans: return "FALLBACK_SAMPLE_KMEANS";
    case AssignmentSource::RandomBaseline: return "RANDOM_BASELINE";
    case AssignmentSource::FlatKMeansBaseline: return "FLAT_KMEANS_BASELINE";
  }
  return "UNKNOWN";
}

AssignmentSource source_from_string(const std::string& s) {
  for (auto v : {AssignmentSource::GbRepresentative, AssignmentSource::FallbackSampleKMeans,
                 AssignmentSource::RandomBaseline, AssignmentSource::FlatKMeansBaseline})
    if (s == to_string(v)) return v;
  throw Error(ErrorCode::InvalidArgument, "unknown assignment source '" + s + "'");
}

void PseudoDomainAssignment::validate() const {
  require(k >= 1, ErrorCode::InvalidArgument, "K must be at least 1");
  for (int l : labels) require(l >= 0 && l < k, ErrorCode::InvalidArgument, "label out of range [0, K)");
  if (ball_of_sample) {
    require(ball_of_sample->size() == labels.size(), ErrorCode::InvalidArgument, "ball_of_sample length mismatch");
    if (source == AssignmentSource::GbRepresentative) {
      std::map<Index, int> label_of_ball;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = label_of_ball.emplace((*ball_of_sample)[i], labels[i]);
        require(inserted || it->second == labels[i], ErrorCode::InvalidArgument,
                "samples of one granular ball carry different labels");
      }
    }
  }
  if (permutation_applied) {
    auto p = *permutation_applied;
    std::sort(p.begin(), p.end());
    for (int c = 0; c < k; ++c)
      require(static_cast<int>(p.size()) == k && p[static_cast<std::size_t>(c)] == c, ErrorCode::InvalidArgument,
              "permutation_applied is not a permutation of [0, K)");
  }
}

std::vector<int> hungarian_min_cost(const Matrix& cost) {
  require(cost.rows() == cost.cols(), ErrorCode::InvalidArgument, "Hungarian cost matrix must be square");
  require(cost.allFinite(), ErrorCode::NonFinite, "non-finite Hungarian costs");
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual start
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int row = 1; row <= n; ++row) {
    match[0] = row;
    int col0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, false);
    do {
      used[col0] = true;
      const int row0 = match[col0];
      double delta = inf;
      int col1 = 0;
      for (int col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double reduced = cost(row0 - 1, col - 1) - u[row0] - v[col];
        if (reduced < minv[col]) {
          minv[col] = reduced;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (int col = 0; col <= n; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int col = 1; col <= n; ++col) assignment[static_cast<std::size_t>(match[col] - 1)] = col - 1;
  return assignment;
}

Eigen::MatrixXi overlap_matrix(const Labels& current, const Labels& previous, int k) {
  require(current.size() == previous.size(), ErrorCode::InvalidArgument, "label vectors differ in length");
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(k, k);
  for (std::size_t i = 0; i < current.size(); ++i) {
    require(current[i] >= 0 && current[i] < k && previous[i] >= 0 && previous[i] < k, ErrorCode::InvalidArgument,
            "label out of range [0, K)");
    ++m(current[i], previous[i]);
  }
  return m;
}

PseudoDomainAssignment align_labels(const PseudoDomainAssignment& current, const PseudoDomainAssignment& previous) {
  require(current.labels.size() == previous.labels.size(), ErrorCode::Precondition,
          "sample count changed between epochs");
  require(current.k == previous.k, ErrorCode::ClusterCountChanged, "cluster count changed");
  const int k = current.k;
  const Eigen::MatrixXi overlap = overlap_matrix(current.labels, previous.labels, k);

  // Overlap is scaled by K+1 so the fixed-point bonus only breaks ties.
  Matrix cost(k, k);
  for (int c = 0; c < k; ++c)
    for (int p = 0; p < k; ++p) cost(c, p) = -(static_cast<double>(overlap(c, p)) * (k + 1) + (c == p ? 1.0 : 0.0));
  const std::vector<int> perm = hungarian_min_cost(cost);

  PseudoDomainAssignment out = current;
  for (auto& l : out.labels) l = perm[static_cast<std::size_t>(l)];
  out.permutation_applied = perm;
  return out;
}

void save_assignment_csv(const PseudoDomainAssignment& a, const std::vector<std::string>& ids,
                         const std::filesystem::path& path) {
  require(ids.size() == a.labels.size(), ErrorCode::InvalidArgument, "id count does not match label count");
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out << "sample_id,label,ball_id\n";
  for (std::size_t i = 0; i < a.labels.size(); ++i)
    out << ids[i] << ',' << a.labels[i] << ',' << (a.ball_of_sample ? (*a.ball_of_sample)[i] : Index{-1}) << '\n';
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path.string());
}

LoadedAssignment load_assignment(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + csv_path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::HeaderMismatch, "missing assignment header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line.rfind("sample_id,label", 0) == 0, ErrorCode::HeaderMismatch, "assignment header must be sample_id,label[,ball_id]");
  const bool has_ball = line == "sample_id,label,ball_id";

  LoadedAssignment out;
  std::vector<Index> balls;
  bool any_ball = false;
  std::size_t lineno = 1;
  auto parse_int = [&](std::string_view s) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc() && p == s.data() + s.size(), ErrorCode::InvalidArgument,
            "line " + std::to_string(lineno) + ": bad integer '" + std::string(s) + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest = line;
    for (auto pos = rest.find(','); pos != std::string_view::npos; pos = rest.find(',')) {
      f.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    f.push_back(rest);
    require(f.size() == (has_ball ? 3u : 2u), ErrorCode::RowArity, "row arity mismatch at line " + std::to_string(lineno));
    out.ids.emplace_back(f[0]);
    out.assignment.labels.push_back(static_cast<int>(parse_int(f[1])));
    if (has_ball) {
      balls.push_back(static_cast<Index>(parse_int(f[2])));
      any_ball = any_ball || balls.back() >= 0;
    }
  }
  if (any_ball) out.assignment.ball_of_sample = std::move(balls);

  int max_label = -1;
  for (int l : out.assignment.labels) max_label = std::max(max_label, l);
  out.assignment.k = std::max(max_label + 1, 1);
  out.assignment.source = AssignmentSource::GbRepresentative;

  const auto meta_path = csv_path.parent_path() / "meta.json";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream mi(meta_path);
    try {
      const auto meta = nlohmann::json::parse(mi);
      if (meta.contains("K")) out.assignment.k = meta["K"].get<int>();
      if (meta.contains("epoch")) out.assignment.epoch = meta["epoch"].get<int>();
      if (meta.contains("source")) out.assignment.source = source_from_string(meta["source"].get<std::string>());
      if (meta.contains("permutation") && meta["permutation"].is_array())
        out.assignment.permutation_applied = meta["permutation"].get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::HeaderMismatch, std::string("malformed meta.json: ") + e.what());
    }
  }
  out.assignment.validate();
  return out;
}

}  // namespace gbdomain
