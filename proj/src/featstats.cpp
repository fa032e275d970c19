#include "gbdomain/featstats.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

namespace gbdomain {

namespace {

std::vector<std::string> default_ids(Index n) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return ids;
}

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

template <typename T>
void write_le(std::ostream& out, T v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return to_little_endian(v);
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  // from_chars rejects a leading '+', tolerate it for hand-written files
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line) + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

void check_finite(const Points& z) {
  require(z.allFinite(), ErrorCode::NonFinite, "non-finite descriptor values");
}

DescriptorSet load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::string header_line;
  require(static_cast<bool>(std::getline(in, header_line)), ErrorCode::HeaderMismatch, "missing header line");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::HeaderMismatch, std::string("malformed header: ") + e.what());
  }
  if (!header.is_object() || header.value("magic", "") != "GBD1" || !header.contains("n") || !header.contains("d") ||
      !header["n"].is_number_integer() || !header["d"].is_number_integer())
    throw Error(ErrorCode::HeaderMismatch, "header is not a GBD1 descriptor header");
  const auto n = header["n"].get<long long>();
  const auto d = header["d"].get<long long>();
  require(n >= 0 && d >= 0, ErrorCode::HeaderMismatch, "negative shape in header");
  const bool has_count = header.value("has_count", false);
  const bool has_domain = header.value("has_domain", false);

  const std::string payload{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto expected = static_cast<std::size_t>(n) * static_cast<std::size_t>(d) * 4 + (has_count ? n * 4 : 0) +
                        (has_domain ? n * 4 : 0);
  require(payload.size() == expected, ErrorCode::PayloadSize, "payload size mismatch");

  Points z(n, d);
  const char* p = payload.data();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j, p += 4) z(i, j) = static_cast<double>(read_le<float>(p));
  check_finite(z);

  std::optional<Vector> counts;
  if (has_count) {
    counts = Vector(n);
    for (Index i = 0; i < n; ++i, p += 4) (*counts)(i) = static_cast<double>(read_le<float>(p));
    require(counts->allFinite(), ErrorCode::NonFinite, "non-finite counts");
  }
  std::optional<std::vector<int>> domains;
  if (has_domain) {
    domains = std::vector<int>(static_cast<std::size_t>(n));
    for (auto& v : *domains) {
      v = read_le<std::int32_t>(p);
      p += 4;
    }
  }

  std::vector<std::string> ids;
  if (header.contains("ids")) {
    require(header["ids"].is_array() && header["ids"].size() == static_cast<std::size_t>(n), ErrorCode::HeaderMismatch,
            "ids length does not match n");
    ids = header["ids"].get<std::vector<std::string>>();
  }
  return DescriptorSet(std::move(z), std::move(ids), std::move(counts), std::move(domains));
}

void save_binary(const DescriptorSet& set, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["magic"] = "GBD1";
  header["n"] = set.size();
  header["d"] = set.dim();
  header["has_count"] = set.counts().has_value();
  header["has_domain"] = set.domains().has_value();
  if (!set.has_default_ids()) header["ids"] = set.ids();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out << header.dump() << '\n';
  const Points& z = set.matrix();
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = 0; j < z.cols(); ++j) write_le(out, static_cast<float>(z(i, j)));
  if (set.counts())
    for (Index i = 0; i < set.size(); ++i) write_le(out, static_cast<float>((*set.counts())(i)));
  if (set.domains())
    for (int v : *set.domains()) write_le(out, static_cast<std::int32_t>(v));
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path.string());
}

DescriptorSet load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::HeaderMismatch, "missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto cols = split_csv(line);
  require(!cols.empty() && cols[0] == "id", ErrorCode::HeaderMismatch, "CSV header must start with 'id'");

  std::size_t ncols = cols.size();
  bool has_domain = false, has_count = false;
  if (ncols > 1 && cols[ncols - 1] == "domain") {
    has_domain = true;
    --ncols;
  }
  if (ncols > 1 && cols[ncols - 1] == "count") {
    has_count = true;
    --ncols;
  }
  const Index d = static_cast<Index>(ncols) - 1;
  for (Index j = 0; j < d; ++j)
    require(cols[static_cast<std::size_t>(j) + 1] == "z" + std::to_string(j), ErrorCode::HeaderMismatch,
            "unexpected CSV column '" + std::string(cols[static_cast<std::size_t>(j) + 1]) + "'");

  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<double> counts;
  std::vector<int> domains;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    require(fields.size() == cols.size(), ErrorCode::RowArity, "row arity mismatch at line " + std::to_string(lineno));
    ids.emplace_back(fields[0]);
    for (Index j = 0; j < d; ++j) values.push_back(parse_double(fields[static_cast<std::size_t>(j) + 1], lineno));
    std::size_t k = static_cast<std::size_t>(d) + 1;
    if (has_count) counts.push_back(parse_double(fields[k++], lineno));
    if (has_domain) domains.push_back(static_cast<int>(parse_double(fields[k], lineno)));
  }

  const auto n = static_cast<Index>(ids.size());
  Points z = Eigen::Map<Points>(values.data(), n, d);
  check_finite(z);
  std::optional<Vector> count_vec;
  if (has_count) {
    count_vec = Eigen::Map<Vector>(counts.data(), n);
    require(count_vec->allFinite(), ErrorCode::NonFinite, "non-finite counts");
  }
  std::optional<std::vector<int>> domain_vec;
  if (has_domain) domain_vec = std::move(domains);
  return DescriptorSet(std::move(z), std::move(ids), std::move(count_vec), std::move(domain_vec));
}

void save_csv(const DescriptorSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out << "id";
  for (Index j = 0; j < set.dim(); ++j) out << ",z" << j;
  if (set.counts()) out << ",count";
  if (set.domains()) out << ",domain";
  out << '\n';
  for (Index i = 0; i < set.size(); ++i) {
    const auto& id = set.ids()[static_cast<std::size_t>(i)];
    require(id.find_first_of(",\n\r") == std::string::npos, ErrorCode::InvalidArgument,
            "sample id '" + id + "' cannot be written to CSV");
    out << id;
    for (Index j = 0; j < set.dim(); ++j) out << ',' << format_double(set.matrix()(i, j));
    if (set.counts()) out << ',' << format_double((*set.counts())(i));
    if (set.domains()) out << ',' << (*set.domains())[static_cast<std::size_t>(i)];
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace

DescriptorSet::DescriptorSet(Points z, std::vector<std::string> ids, std::optional<Vector> counts,
                             std::optional<std::vector<int>> domains)
    : z_(std::move(z)), ids_(std::move(ids)), counts_(std::move(counts)), domains_(std::move(domains)) {
  if (ids_.empty()) ids_ = default_ids(z_.rows());
  validate();
}

void DescriptorSet::validate() const {
  require(static_cast<Index>(ids_.size()) == z_.rows(), ErrorCode::HeaderMismatch, "id count does not match rows");
  require(!counts_ || counts_->size() == z_.rows(), ErrorCode::HeaderMismatch, "count column length mismatch");
  require(!domains_ || static_cast<Index>(domains_->size()) == z_.rows(), ErrorCode::HeaderMismatch,
          "domain column length mismatch");
  check_finite(z_);
  if (counts_)
    for (Index i = 0; i < counts_->size(); ++i)
      require(std::isfinite((*counts_)(i)) && (*counts_)(i) >= 0.0, ErrorCode::NonFinite,
              "counts must be finite and nonnegative");
  std::unordered_set<std::string> seen;
  for (const auto& id : ids_)
    require(seen.insert(id).second, ErrorCode::DuplicateId, "duplicate sample id '" + id + "'");
}

Descriptor DescriptorSet::at(Index i) const {
  require(i >= 0 && i < size(), ErrorCode::InvalidArgument, "descriptor index out of range");
  Descriptor d{ids_[static_cast<std::size_t>(i)], z_.row(i).transpose(), std::nullopt, std::nullopt};
  if (counts_) d.gt_count = (*counts_)(i);
  if (domains_) d.true_domain = (*domains_)[static_cast<std::size_t>(i)];
  return d;
}

void DescriptorSet::push_back(const Descriptor& d) {
  const bool first = size() == 0;
  require(first || d.z.size() == dim(), ErrorCode::HeaderMismatch, "descriptor dimension mismatch");
  require(d.z.allFinite(), ErrorCode::NonFinite, "non-finite descriptor values");
  require(first || d.gt_count.has_value() == counts_.has_value(), ErrorCode::HeaderMismatch,
          "count sidecar present on some samples only");
  require(first || d.true_domain.has_value() == domains_.has_value(), ErrorCode::HeaderMismatch,
          "domain sidecar present on some samples only");
  for (const auto& id : ids_)
    require(id != d.sample_id, ErrorCode::DuplicateId, "duplicate sample id '" + d.sample_id + "'");
  if (d.gt_count) require(*d.gt_count >= 0.0 && std::isfinite(*d.gt_count), ErrorCode::NonFinite, "invalid count");

  const Index n = size();
  z_.conservativeResize(n + 1, d.z.size());
  z_.row(n) = d.z.transpose();
  ids_.push_back(d.sample_id);
  if (d.gt_count) {
    if (!counts_) counts_ = Vector(0);
    counts_->conservativeResize(n + 1);
    (*counts_)(n) = *d.gt_count;
  }
  if (d.true_domain) {
    if (!domains_) domains_.emplace();
    domains_->push_back(*d.true_domain);
  }
}

bool DescriptorSet::has_default_ids() const {
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (ids_[i] != std::to_string(i)) return false;
  return true;
}

FeatureLevelStats channel_stats(const Eigen::Ref<const Matrix>& feature_map, int level_index) {
  require(feature_map.rows() >= 1, ErrorCode::InvalidArgument, "feature map needs at least one channel");
  require(feature_map.cols() >= 1, ErrorCode::InvalidArgument, "empty feature map");
  require(feature_map.allFinite(), ErrorCode::NonFinite, "non-finite activations");
  FeatureLevelStats s;
  s.level_index = level_index;
  s.mean = feature_map.rowwise().mean();
  // two-pass: centered second moment, population normalization
  s.std = ((feature_map.colwise() - s.mean).array().square().rowwise().sum() / static_cast<double>(feature_map.cols()))
              .sqrt()
              .matrix();
  return s;
}

Descriptor build_descriptor(std::span<const FeatureLevelStats> stats, std::string sample_id,
                            std::optional<double> gt_count, std::optional<int> true_domain) {
  require(!stats.empty(), ErrorCode::InvalidArgument, "at least one feature level is required");
  std::vector<const FeatureLevelStats*> order;
  Index total = 0;
  for (const auto& s : stats) {
    require(s.mean.size() == s.std.size() && s.mean.size() >= 1, ErrorCode::InvalidArgument,
            "mean and std vectors must have equal, nonzero length");
    require(s.mean.allFinite() && s.std.allFinite() && (s.std.array() >= 0.0).all(), ErrorCode::NonFinite,
            "level statistics must be finite with nonnegative std");
    order.push_back(&s);
    total += 2 * s.mean.size();
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->level_index < b->level_index; });
  for (std::size_t i = 1; i < order.size(); ++i)
    require(order[i]->level_index != order[i - 1]->level_index, ErrorCode::InvalidArgument,
            "duplicate level index " + std::to_string(order[i]->level_index));
  if (gt_count) require(*gt_count >= 0.0 && std::isfinite(*gt_count), ErrorCode::InvalidArgument, "invalid gt_count");

  Descriptor d{std::move(sample_id), Vector(total), gt_count, true_domain};
  Index offset = 0;
  for (const auto* s : order) {
    const Index c = s->mean.size();
    d.z.segment(offset, c) = s->mean;
    d.z.segment(offset + c, c) = s->std;
    offset += 2 * c;
  }
  return d;
}

DescriptorFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? DescriptorFormat::Csv : DescriptorFormat::Binary;
}

DescriptorSet load_descriptors(const std::filesystem::path& path) {
  return load_descriptors(path, format_from_path(path));
}

DescriptorSet load_descriptors(const std::filesystem::path& path, DescriptorFormat format) {
  return format == DescriptorFormat::Csv ? load_csv(path) : load_binary(path);
}

void save_descriptors(const DescriptorSet& set, const std::filesystem::path& path) {
  save_descriptors(set, path, format_from_path(path));
}

void save_descriptors(const DescriptorSet& set, const std::filesystem::path& path, DescriptorFormat format) {
  if (format == DescriptorFormat::Csv)
    save_csv(set, path);
  else
    save_binary(set, path);
}

}  // namespace gbdomain
