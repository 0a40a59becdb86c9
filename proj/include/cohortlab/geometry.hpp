#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

namespace cohortlab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Similarity placement x' = scale * R * x + t. 2D data lives in the z = 0 plane.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }

  static Pose from_translation(const Vec3& t) {
    Pose p;
    p.translation = t;
    return p;
  }
  /// Rotation by `angle` (radians) about the z axis through `pivot`, then translation by `t`.
  static Pose planar(double angle, const Vec3& pivot, const Vec3& t) {
    Pose p;
    p.rotation = Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
    p.translation = pivot - p.rotation * pivot + t;
    return p;
  }
};

inline std::vector<Vec3> transform_points(const Pose& pose, const std::vector<Vec3>& points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(pose.apply(p));
  return out;
}

}  // namespace cohortlab
