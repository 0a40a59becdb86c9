#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cohortlab/cohort/summary.hpp"
#include "cohortlab/cohort/types.hpp"
#include "cohortlab/mixed/dbscan.hpp"
#include "cohortlab/mixed/distance.hpp"
#include "cohortlab/shape/centerline.hpp"
#include "cohortlab/shape/cluster.hpp"
#include "json.hpp"

namespace cohortlab::mixed {

enum class Algorithm { mixed_dbscan, mixed_hierarchical, shape_hierarchical };
std::string_view to_string(Algorithm a) noexcept;
Algorithm parse_algorithm(std::string_view text);

/// Result of one clustering run. Subjects are in ascending id order; labels
/// are cluster ids 0..k-1 or kNoise.
struct ClusterRun {
  Algorithm algorithm = Algorithm::mixed_dbscan;
  nlohmann::json params;
  std::vector<std::string> input_ids;
  std::vector<std::string> subject_ids;  // used subjects
  std::vector<int> labels;
  std::vector<std::string> excluded_ids;
  std::size_t n_input = 0;
  std::size_t n_used = 0;
  std::size_t n_excluded_missing = 0;
  std::size_t n_with_missing = 0;  // used subjects with at least one missing attribute
  std::size_t n_clusters = 0;
  std::size_t n_noise = 0;
  std::vector<std::size_t> cluster_sizes;
  nlohmann::json details;  // dendrogram, representatives, normalizers, ...
  std::string input_digest;
  std::string run_hash;

  /// Label of a subject, nullopt if it was not used.
  std::optional<int> label_of(std::string_view subject_id) const;
};

struct HierarchicalParams {
  shape::Linkage linkage = shape::Linkage::average;
  shape::CutRule cut = shape::CutRule::clusters(2);
};

struct ShapeRunParams {
  shape::Linkage linkage = shape::Linkage::average;
  shape::CutRule cut = shape::CutRule::clusters(7);
  int alignment_iterations = 2;
};

nlohmann::json cut_to_json(const shape::CutRule& cut);
shape::CutRule cut_from_json(const nlohmann::json& j);

/// Digest of the DistanceSpec attributes of `cohort` (records in id order).
std::string records_digest(const cohort::Cohort& cohort, const std::vector<std::string>& attributes);
/// Digest of centerlines in id order.
std::string centerlines_digest(const std::vector<shape::Centerline>& lines);

/// Throws Error(empty_selection) for an empty cohort, Error(empty_input) if
/// no record is usable, plus DistanceSpec and parameter validation errors.
ClusterRun run_dbscan(const cohort::Cohort& cohort, const MixedDistanceSpec& spec, const DbscanParams& params);
/// Undefined pairwise distances count as 1 (maximal dissimilarity).
ClusterRun run_mixed_hierarchical(const cohort::Cohort& cohort, const MixedDistanceSpec& spec,
                                  const HierarchicalParams& params);
/// Aligns to the iterated mean shape, then clusters mean point distances.
ClusterRun run_shape_hierarchical(const std::vector<shape::Centerline>& lines, const ShapeRunParams& params);

/// Runs the algorithm named in `request` ({"algorithm", "params"}).
ClusterRun run_clustering(const nlohmann::json& request, const cohort::Cohort& cohort,
                          const std::vector<shape::Centerline>* lines = nullptr);

/// Analysis report: every parameter verbatim, counts, digests, labels.
nlohmann::json cluster_report(const ClusterRun& run, const nlohmann::json& cohort_ref = nullptr);

/// Rebuilds the run recorded in a report (no recomputation).
ClusterRun run_from_report(const nlohmann::json& report);

/// Re-runs a report against data. Throws Error(digest_mismatch) naming the
/// differing input when the data digest, or the resulting run hash, differs.
ClusterRun replay_report(const nlohmann::json& report, const cohort::Cohort& cohort,
                         const std::vector<shape::Centerline>* lines = nullptr);

struct HistogramBins {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};

struct ClusterProfile {
  int label = 0;
  std::size_t n = 0;          // cluster members, including those missing the attribute
  std::size_t n_missing = 0;
  std::optional<cohort::FiveNumber> five_number;       // scalar and ordinal
  std::optional<HistogramBins> histogram;              // scalar
  std::vector<cohort::FrequencyEntry> frequencies;     // nominal and ordinal
};

struct AttributeProfile {
  std::string attribute;
  cohort::AttributeKind kind = cohort::AttributeKind::scalar;
  std::vector<ClusterProfile> clusters;  // label order, noise last
};

/// Throws Error(unknown_attribute), or Error(not_found) if a run subject is
/// absent from the cohort.
AttributeProfile cluster_attribute_profile(const ClusterRun& run, const cohort::Cohort& cohort,
                                           const std::string& attribute, std::size_t histogram_bins = 10);

nlohmann::json profile_to_json(const AttributeProfile& p);
nlohmann::json five_number_to_json(const cohort::FiveNumber& f);

}  // namespace cohortlab::mixed
