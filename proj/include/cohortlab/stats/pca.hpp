#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cohortlab/cohort/types.hpp"
#include "json.hpp"

namespace cohortlab::stats {

struct PcaResult {
  std::vector<std::string> attributes;
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // unit columns, variance order
  Eigen::VectorXd variances;   // sample covariance eigenvalues (n - 1 divisor)
  Eigen::VectorXd explained_ratio;
  Eigen::MatrixXd scores;      // rows = used observations
  std::vector<std::size_t> rows_used;
  std::size_t n_used = 0;
  std::size_t n_missing = 0;
};

/// PCA of the mean-centred covariance. Throws Error(empty_input) for fewer than two rows.
PcaResult pca(const Eigen::MatrixXd& data);

/// Complete-case PCA over numeric views of the attributes (rank / category index for categorical).
PcaResult pca(const cohort::Cohort& cohort, const std::vector<std::string>& attributes);

struct GroupEllipse {
  int group = 0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Matrix2d axes = Eigen::Matrix2d::Identity();  // columns, major axis first
  Eigen::Vector2d radii = Eigen::Vector2d::Zero();     // 2 sd along each axis
  std::size_t n = 0;
  double opacity = 0.0;  // n / largest group size
};

/// One ellipse per distinct group value with at least two points, groups ascending.
std::vector<GroupEllipse> group_ellipses(const Eigen::MatrixX2d& points, const std::vector<int>& groups);

nlohmann::json pca_to_json(const PcaResult& p, bool include_scores = false);
nlohmann::json ellipses_to_json(const std::vector<GroupEllipse>& e);

}  // namespace cohortlab::stats
