#include "cohortlab/mixed/dbscan.hpp"

#include <deque>

#include "cohortlab/error.hpp"

namespace cohortlab::mixed {

void DbscanParams::validate() const {
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_argument, "eps must be > 0");
  if (min_points < 1) throw Error(ErrorCode::invalid_argument, "min_points must be >= 1");
}

DbscanLabels dbscan(const Eigen::MatrixXd& d, const DbscanParams& params) {
  params.validate();
  if (d.rows() != d.cols()) throw Error(ErrorCode::invalid_argument, "distance matrix must be square");
  const auto n = static_cast<std::size_t>(d.rows());
  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= params.eps) {
        neighbours[i].push_back(j);
      }
    }
  }
  DbscanLabels out;
  out.labels.assign(n, kNoise);
  out.core.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) out.core[i] = neighbours[i].size() >= params.min_points;

  int next = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!out.core[seed] || out.labels[seed] != kNoise) continue;
    std::deque<std::size_t> queue{seed};
    out.labels[seed] = next;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      for (std::size_t q : neighbours[p]) {
        if (out.core[q] && out.labels[q] == kNoise) {
          out.labels[q] = next;
          queue.push_back(q);
        }
      }
    }
    ++next;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (out.core[i]) continue;
    for (std::size_t q : neighbours[i]) {
      if (out.core[q]) {
        out.labels[i] = out.labels[q];
        break;
      }
    }
  }
  out.n_clusters = static_cast<std::size_t>(next);
  return out;
}

}  // namespace cohortlab::mixed
