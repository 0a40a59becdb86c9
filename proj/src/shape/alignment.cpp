#include "cohortlab/shape/alignment.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "cohortlab/error.hpp"

namespace cohortlab::shape {

namespace {

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

double rms(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(a.size()));
}

bool planar(const std::vector<Vec3>& pts) {
  return std::all_of(pts.begin(), pts.end(), [](const Vec3& p) { return p.z() == 0.0; });
}

}  // namespace

double planar_angle(const Mat3& r) { return std::atan2(r(1, 0), r(0, 0)); }

AlignResult align_rigid(const Centerline& moving, const Centerline& reference) {
  const auto& x = moving.points;
  const auto& y = reference.points;
  if (x.size() != y.size() || x.empty()) {
    throw Error(ErrorCode::invalid_argument, "alignment needs equal, non-zero point counts");
  }
  const Vec3 cx = centroid(x), cy = centroid(y);
  double spread_x = 0.0, spread_y = 0.0;
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Vec3 a = x[i] - cx, b = y[i] - cy;
    spread_x += a.squaredNorm();
    spread_y += b.squaredNorm();
    h += a * b.transpose();
  }
  if (!(spread_x > 0.0) || !(spread_y > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "degenerate alignment: all points coincide");
  }
  Mat3 r = Mat3::Identity();
  if (planar(x) && planar(y)) {
    // Maximize trace(R^T H) over planar rotations.
    const double angle = std::atan2(h(0, 1) - h(1, 0), h(0, 0) + h(1, 1));
    const double c = std::cos(angle), s = std::sin(angle);
    r.topLeftCorner<2, 2>() << c, -s, s, c;
  } else {
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    r = svd.matrixV() * d * svd.matrixU().transpose();
  }
  AlignResult out;
  out.transform.rotation = r;
  out.transform.translation = cy - r * cx;
  out.aligned.subject_id = moving.subject_id;
  out.aligned.points.reserve(x.size());
  for (const auto& p : x) out.aligned.points.push_back(out.transform.apply(p));
  if (planar(x) && planar(y)) {
    for (auto& p : out.aligned.points) p.z() = 0.0;
  }
  out.residual = rms(out.aligned.points, y);
  out.identity_residual = rms(x, y);
  return out;
}

MeanAlignment align_to_mean(const std::vector<Centerline>& lines, int iterations) {
  if (lines.empty()) throw Error(ErrorCode::empty_input, "no centerlines to align");
  const std::size_t n_pts = lines.front().points.size();
  for (const auto& c : lines) {
    if (c.points.size() != n_pts) throw Error(ErrorCode::invalid_argument, "centerlines differ in point count");
  }
  std::vector<std::size_t> order(lines.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lines[a].subject_id < lines[b].subject_id; });
  auto mean_of = [&](const std::vector<Centerline>& set) {
    Centerline m;
    m.subject_id = "mean";
    m.points.assign(n_pts, Vec3::Zero());
    for (std::size_t k : order) {
      for (std::size_t i = 0; i < n_pts; ++i) m.points[i] += set[k].points[i];
    }
    for (auto& p : m.points) p /= static_cast<double>(set.size());
    return m;
  };
  MeanAlignment out;
  out.mean = mean_of(lines);
  out.aligned = lines;
  for (int it = 0; it <= iterations; ++it) {
    for (std::size_t k = 0; k < lines.size(); ++k) out.aligned[k] = align_rigid(lines[k], out.mean).aligned;
    if (it < iterations) out.mean = mean_of(out.aligned);
  }
  return out;
}

}  // namespace cohortlab::shape
