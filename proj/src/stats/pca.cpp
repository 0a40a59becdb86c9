#include "cohortlab/stats/pca.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>

#include "cohortlab/error.hpp"

namespace cohortlab::stats {

using nlohmann::json;

PcaResult pca(const Eigen::MatrixXd& data) {
  if (data.rows() < 2) throw Error(ErrorCode::empty_input, "PCA needs at least two complete rows");
  if (data.cols() < 1) throw Error(ErrorCode::invalid_argument, "PCA needs at least one column");
  PcaResult r;
  r.n_used = static_cast<std::size_t>(data.rows());
  r.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centred = data.rowwise() - r.mean.transpose();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::eigen_failure, "covariance eigen-decomposition failed");
  const auto p = data.cols();
  r.components.resize(p, p);
  r.variances.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    Eigen::VectorXd v = es.eigenvectors().col(p - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    r.components.col(k) = v;
    r.variances(k) = std::max(0.0, es.eigenvalues()(p - 1 - k));
  }
  const double total = cov.trace();
  r.explained_ratio = total > 0.0 ? Eigen::VectorXd(r.variances / total) : Eigen::VectorXd::Zero(p);
  r.scores = centred * r.components;
  for (Eigen::Index i = 0; i < data.rows(); ++i) r.rows_used.push_back(static_cast<std::size_t>(i));
  return r;
}

PcaResult pca(const cohort::Cohort& cohort, const std::vector<std::string>& attributes) {
  if (attributes.empty()) throw Error(ErrorCode::invalid_argument, "PCA needs at least one attribute");
  for (const auto& a : attributes) cohort.dictionary.at(a);
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> used;
  std::size_t missing = 0;
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    std::vector<double> row;
    for (const auto& a : attributes) {
      const auto v = cohort::numeric(cohort.subjects[i].value(a));
      if (!v) break;
      row.push_back(*v);
    }
    if (row.size() != attributes.size()) {
      ++missing;
      continue;
    }
    rows.push_back(std::move(row));
    used.push_back(i);
  }
  if (rows.size() < 2) throw Error(ErrorCode::empty_input, "PCA needs at least two complete rows");
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(attributes.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < attributes.size(); ++j) {
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  auto r = pca(data);
  r.attributes = attributes;
  r.rows_used = used;
  r.n_missing = missing;
  return r;
}

std::vector<GroupEllipse> group_ellipses(const Eigen::MatrixX2d& points, const std::vector<int>& groups) {
  if (static_cast<std::size_t>(points.rows()) != groups.size()) {
    throw Error(ErrorCode::invalid_argument, "points and groups differ in length");
  }
  std::map<int, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(static_cast<Eigen::Index>(i));
  std::vector<GroupEllipse> out;
  std::size_t largest = 0;
  for (const auto& [g, idx] : members) {
    if (idx.size() < 2) continue;
    GroupEllipse e;
    e.group = g;
    e.n = idx.size();
    for (auto i : idx) e.center += points.row(i).transpose();
    e.center /= static_cast<double>(e.n);
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (auto i : idx) {
      const Eigen::Vector2d d = points.row(i).transpose() - e.center;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(e.n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d v = es.eigenvectors().col(1 - k);
      Eigen::Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0.0) v = -v;
      e.axes.col(k) = v;
      e.radii(k) = 2.0 * std::sqrt(std::max(0.0, es.eigenvalues()(1 - k)));
    }
    largest = std::max(largest, e.n);
    out.push_back(e);
  }
  for (auto& e : out) e.opacity = static_cast<double>(e.n) / static_cast<double>(largest);
  return out;
}

json pca_to_json(const PcaResult& p, bool include_scores) {
  json comps = json::array();
  for (Eigen::Index k = 0; k < p.components.cols(); ++k) {
    comps.push_back(std::vector<double>(p.components.col(k).data(), p.components.col(k).data() + p.components.rows()));
  }
  json out{{"attributes", p.attributes},
           {"mean", std::vector<double>(p.mean.data(), p.mean.data() + p.mean.size())},
           {"components", comps},
           {"variances", std::vector<double>(p.variances.data(), p.variances.data() + p.variances.size())},
           {"explained_ratio",
            std::vector<double>(p.explained_ratio.data(), p.explained_ratio.data() + p.explained_ratio.size())},
           {"n_used", p.n_used},
           {"n_missing", p.n_missing}};
  if (include_scores) {
    json scores = json::array();
    for (Eigen::Index i = 0; i < p.scores.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(p.scores.cols()));
      for (Eigen::Index k = 0; k < p.scores.cols(); ++k) row[static_cast<std::size_t>(k)] = p.scores(i, k);
      scores.push_back(row);
    }
    out["scores"] = scores;
  }
  return out;
}

json ellipses_to_json(const std::vector<GroupEllipse>& es) {
  json a = json::array();
  for (const auto& e : es) {
    a.push_back({{"group", e.group},
                 {"center", {e.center(0), e.center(1)}},
                 {"axes", {{e.axes(0, 0), e.axes(1, 0)}, {e.axes(0, 1), e.axes(1, 1)}}},
                 {"radii", {e.radii(0), e.radii(1)}},
                 {"n", e.n},
                 {"opacity", e.opacity}});
  }
  return a;
}

}  // namespace cohortlab::stats
