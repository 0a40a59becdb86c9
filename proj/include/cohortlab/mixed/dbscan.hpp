#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace cohortlab::mixed {

inline constexpr int kNoise = -1;

struct DbscanParams {
  double eps = 0.1;
  std::size_t min_points = 5;

  /// Throws Error(invalid_argument) for eps <= 0 or min_points < 1.
  void validate() const;
};

struct DbscanLabels {
  std::vector<int> labels;  // cluster id or kNoise, same order as the matrix
  std::vector<bool> core;
  std::size_t n_clusters = 0;
};

/// DBSCAN over a precomputed matrix (infinite entries are never neighbours).
/// A point's neighbourhood includes itself. Clusters are the connected
/// components of core points, numbered by their smallest index; a border
/// point joins the cluster of its lowest-index core neighbour.
DbscanLabels dbscan(const Eigen::MatrixXd& distances, const DbscanParams& params);

}  // namespace cohortlab::mixed
