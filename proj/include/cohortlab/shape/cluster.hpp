#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cohortlab/shape/centerline.hpp"
#include "json.hpp"

namespace cohortlab::shape {

/// Mean Euclidean distance over corresponding points.
double centerline_distance(const Centerline& a, const Centerline& b);
Eigen::MatrixXd distance_matrix(const std::vector<Centerline>& lines);

enum class Linkage { single, complete, average };
std::string_view to_string(Linkage linkage) noexcept;
Linkage parse_linkage(std::string_view text);

/// Either a target cluster count or a merge-height threshold (merges with
/// height <= threshold are applied).
struct CutRule {
  std::optional<std::size_t> count;
  std::optional<double> height;

  static CutRule clusters(std::size_t k) { return CutRule{k, std::nullopt}; }
  static CutRule at_height(double h) { return CutRule{std::nullopt, h}; }
};

/// One dendrogram merge. Cluster ids follow the usual convention: leaves are
/// 0..n-1 and the k-th merge creates id n + k.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct ShapeClustering {
  std::vector<Merge> merges;                 // full tree, n - 1 merges
  std::vector<int> labels;                   // per input, 0..k-1 in order of first member
  std::vector<std::size_t> representatives;  // per cluster, input index
  std::vector<std::size_t> sizes;
  Linkage linkage = Linkage::average;
  CutRule cut;

  std::size_t n_clusters() const noexcept { return sizes.size(); }
};

/// Lance-Williams agglomeration over a symmetric non-negative matrix. Ties
/// are broken by the smallest pair of (smallest member index) keys.
/// Throws Error(invalid_argument) for a bad matrix or a cut count outside 1..n.
ShapeClustering agglomerative_cluster(const Eigen::MatrixXd& distances, Linkage linkage, const CutRule& cut);

/// Member with the smallest summed distance to the other members; ties go to
/// the smallest index. Throws Error(invalid_argument) for an empty set.
std::size_t representative(const std::vector<std::size_t>& members, const Eigen::MatrixXd& distances);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

nlohmann::json clustering_to_json(const ShapeClustering& c, const std::vector<std::string>& subject_ids);

}  // namespace cohortlab::shape
