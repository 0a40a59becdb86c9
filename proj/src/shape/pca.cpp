#include "cohortlab/shape/pca.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "cohortlab/error.hpp"

namespace cohortlab::shape {

using nlohmann::json;

Eigen::VectorXd flatten(const std::vector<Vec3>& points) {
  Eigen::VectorXd v(3 * points.size());
  for (std::size_t i = 0; i < points.size(); ++i) v.segment<3>(3 * static_cast<Eigen::Index>(i)) = points[i];
  return v;
}

Eigen::VectorXd PcaModes::project(const std::vector<Vec3>& points) const {
  const Eigen::VectorXd d = flatten(points) - mean;
  Eigen::VectorXd w(d.size());
  for (std::size_t i = 0; i < landmark_weights.size(); ++i) {
    w.segment<3>(3 * static_cast<Eigen::Index>(i)).setConstant(landmark_weights[i]);
  }
  return modes.transpose() * w.cwiseProduct(d);
}

PcaModes weighted_pca(const std::vector<std::vector<Vec3>>& shapes, std::vector<double> weights) {
  if (shapes.size() < 2) throw Error(ErrorCode::invalid_argument, "weighted PCA needs at least two shapes");
  const std::size_t n_landmarks = shapes.front().size();
  if (n_landmarks == 0) throw Error(ErrorCode::invalid_argument, "shapes have no landmarks");
  for (const auto& s : shapes) {
    if (s.size() != n_landmarks) throw Error(ErrorCode::invalid_argument, "shapes differ in landmark count");
  }
  if (weights.empty()) weights.assign(n_landmarks, 1.0);
  if (weights.size() != n_landmarks) throw Error(ErrorCode::invalid_argument, "one weight per landmark required");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::invalid_argument, "landmark weights must be >= 0");
    wsum += w;
  }
  if (wsum == 0.0) throw Error(ErrorCode::invalid_argument, "landmark weights are all zero");

  const auto dof = static_cast<Eigen::Index>(3 * n_landmarks);
  const auto n = static_cast<Eigen::Index>(shapes.size());
  Eigen::MatrixXd X(dof, n);
  for (Eigen::Index j = 0; j < n; ++j) X.col(j) = flatten(shapes[static_cast<std::size_t>(j)]);
  PcaModes out;
  out.mean = X.rowwise().mean();
  X.colwise() -= out.mean;

  // PCA of W^(1/2) X; modes map back through the pseudo-inverse square root.
  Eigen::VectorXd sqrt_w(dof), inv_sqrt_w(dof);
  for (std::size_t i = 0; i < n_landmarks; ++i) {
    const double s = std::sqrt(weights[i]);
    sqrt_w.segment<3>(3 * static_cast<Eigen::Index>(i)).setConstant(s);
    inv_sqrt_w.segment<3>(3 * static_cast<Eigen::Index>(i)).setConstant(s > 0.0 ? 1.0 / s : 0.0);
  }
  const Eigen::MatrixXd Y = sqrt_w.asDiagonal() * X;
  const Eigen::MatrixXd C = Y * Y.transpose() / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::eigen_failure, "covariance eigen-decomposition failed");

  const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = dof - 1; k >= 0; --k) {
    if (es.eigenvalues()(k) > 1e-12 * top && es.eigenvalues()(k) > 0.0) keep.push_back(k);
  }
  out.modes.resize(dof, static_cast<Eigen::Index>(keep.size()));
  out.variances.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    Eigen::VectorXd v = es.eigenvectors().col(keep[c]);
    // Sign convention: largest-magnitude component positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.modes.col(static_cast<Eigen::Index>(c)) = inv_sqrt_w.asDiagonal() * v;
    out.variances(static_cast<Eigen::Index>(c)) = es.eigenvalues()(keep[c]);
  }
  out.landmark_weights = std::move(weights);
  return out;
}

PcaModes weighted_pca(const std::vector<Centerline>& aligned, std::vector<double> landmark_weights) {
  std::vector<std::vector<Vec3>> shapes;
  shapes.reserve(aligned.size());
  for (const auto& c : aligned) shapes.push_back(c.points);
  return weighted_pca(shapes, std::move(landmark_weights));
}

json pca_modes_to_json(const PcaModes& p, std::size_t max_modes) {
  const auto k = std::min<Eigen::Index>(p.modes.cols(), static_cast<Eigen::Index>(max_modes));
  json modes = json::array();
  for (Eigen::Index c = 0; c < k; ++c) {
    modes.push_back(std::vector<double>(p.modes.col(c).data(), p.modes.col(c).data() + p.modes.rows()));
  }
  const double total = p.total_variance();
  json share = json::array();
  for (Eigen::Index c = 0; c < p.variances.size(); ++c) share.push_back(total > 0.0 ? p.variances(c) / total : 0.0);
  return json{{"mean", std::vector<double>(p.mean.data(), p.mean.data() + p.mean.size())},
              {"modes", modes},
              {"variances", std::vector<double>(p.variances.data(), p.variances.data() + p.variances.size())},
              {"variance_share", share},
              {"landmark_weights", p.landmark_weights}};
}

}  // namespace cohortlab::shape
