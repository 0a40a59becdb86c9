#pragma once

#include <vector>

#include <Eigen/Core>

#include "cohortlab/shape/centerline.hpp"
#include "json.hpp"

namespace cohortlab::shape {

/// Landmark-weighted PCA. Shapes are stacked as (x0, y0, z0, x1, ...); each
/// landmark weight applies to its three coordinates. Modes are orthonormal
/// under the inner product <u, v>_W = sum_i w_i u_i . v_i.
struct PcaModes {
  Eigen::VectorXd mean;
  Eigen::MatrixXd modes;      // column per mode
  Eigen::VectorXd variances;  // non-increasing
  std::vector<double> landmark_weights;

  double total_variance() const { return variances.sum(); }
  /// Coordinates of a shape in the mode basis.
  Eigen::VectorXd project(const std::vector<Vec3>& points) const;
};

Eigen::VectorXd flatten(const std::vector<Vec3>& points);

/// Only modes with positive variance are kept. An empty weight vector means
/// uniform weights. Throws Error(invalid_argument) for fewer than two shapes,
/// mismatched sizes, negative weights or all-zero weights.
PcaModes weighted_pca(const std::vector<std::vector<Vec3>>& shapes, std::vector<double> landmark_weights = {});
PcaModes weighted_pca(const std::vector<Centerline>& aligned, std::vector<double> landmark_weights = {});

nlohmann::json pca_modes_to_json(const PcaModes& p, std::size_t max_modes = 5);

}  // namespace cohortlab::shape
