#pragma once

#include "gbdomain/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gbdomain {

enum class AssignmentSource { GbRepresentative, FallbackSampleKMeans, RandomBaseline, FlatKMeansBaseline };

const char* to_string(AssignmentSource s);
AssignmentSource source_from_string(const std::string& s);

/// Pseudo-domain labels of one epoch with provenance.
struct PseudoDomainAssignment {
  Labels labels;
  int k = 1;
  int epoch = 0;
  AssignmentSource source = AssignmentSource::GbRepresentative;
  std::optional<std::vector<Index>> ball_of_sample;
  /// permutation[c] is the label that current cluster c was renamed to.
  std::optional<std::vector<int>> permutation_applied;

  Index size() const { return static_cast<Index>(labels.size()); }
  /// Throws unless all labels lie in [0, k) and GB labels factor through balls.
  void validate() const;
};

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials). Returns assignment[row] = column.
std::vector<int> hungarian_min_cost(const Matrix& cost);

/// overlap(c, p) = #{i : current_i = c and previous_i = p}
Eigen::MatrixXi overlap_matrix(const Labels& current, const Labels& previous, int k);

/// Renames current labels so that their overlap with `previous` is maximal.
/// Among optimal permutations the one fixing the most labels is chosen.
PseudoDomainAssignment align_labels(const PseudoDomainAssignment& current, const PseudoDomainAssignment& previous);

/// `sample_id,label,ball_id` rows; ball_id is -1 when absent.
void save_assignment_csv(const PseudoDomainAssignment& a, const std::vector<std::string>& ids,
                         const std::filesystem::path& path);

struct LoadedAssignment {
  PseudoDomainAssignment assignment;
  std::vector<std::string> ids;
};

/// Reads the CSV and, when a `meta.json` sits next to it, K/epoch/source/permutation from there.
LoadedAssignment load_assignment(const std::filesystem::path& csv_path);

}  // namespace gbdomain
