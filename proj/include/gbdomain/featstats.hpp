#pragma once

#include "gbdomain/types.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gbdomain {

/// Channel-wise mean and population standard deviation of one feature level.
struct FeatureLevelStats {
  int level_index = 1;
  Vector mean;
  Vector std;
};

struct Descriptor {
  std::string sample_id;
  Vector z;
  std::optional<double> gt_count;
  std::optional<int> true_domain;
};

/// A dataset of descriptors. Row i of `z` is sample i everywhere downstream.
/// Counts and domains are sidecar columns: either present for every sample or absent.
class DescriptorSet {
 public:
  DescriptorSet() = default;
  explicit DescriptorSet(Points z, std::vector<std::string> ids = {},
                         std::optional<Vector> counts = std::nullopt,
                         std::optional<std::vector<int>> domains = std::nullopt);

  Index size() const { return z_.rows(); }
  Index dim() const { return z_.cols(); }

  const Points& matrix() const { return z_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::optional<Vector>& counts() const { return counts_; }
  const std::optional<std::vector<int>>& domains() const { return domains_; }

  Descriptor at(Index i) const;

  /// Appends a descriptor; sidecar presence must agree with the existing rows.
  void push_back(const Descriptor& d);

  /// Ids are "0".."n-1" (the implicit ids of the binary format).
  bool has_default_ids() const;

 private:
  void validate() const;

  Points z_;
  std::vector<std::string> ids_;
  std::optional<Vector> counts_;
  std::optional<std::vector<int>> domains_;
};

/// `feature_map` is C x (H*W): one row per channel, spatial positions flattened.
FeatureLevelStats channel_stats(const Eigen::Ref<const Matrix>& feature_map, int level_index = 1);

/// Concatenates [mean^(1), std^(1), ..., mean^(L), std^(L)] in ascending level order.
Descriptor build_descriptor(std::span<const FeatureLevelStats> stats, std::string sample_id,
                            std::optional<double> gt_count = std::nullopt,
                            std::optional<int> true_domain = std::nullopt);

enum class DescriptorFormat { Binary, Csv };

/// Picks the format from the extension: ".csv" is CSV, anything else binary.
DescriptorFormat format_from_path(const std::filesystem::path& path);

DescriptorSet load_descriptors(const std::filesystem::path& path);
DescriptorSet load_descriptors(const std::filesystem::path& path, DescriptorFormat format);
void save_descriptors(const DescriptorSet& set, const std::filesystem::path& path);
void save_descriptors(const DescriptorSet& set, const std::filesystem::path& path, DescriptorFormat format);

}  // namespace gbdomain
