#pragma once

#include <vector>

#include "cohortlab/shape/centerline.hpp"

namespace cohortlab::shape {

/// x -> rotation * x + translation (no scaling).
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
};

struct AlignResult {
  RigidTransform transform;
  Centerline aligned;
  double residual = 0.0;           // RMS point distance after alignment
  double identity_residual = 0.0;  // RMS point distance before alignment
};

/// Least-squares rigid fit of `moving` onto `reference` with index
/// correspondence (Kabsch). Planar input (all z = 0) is solved in the plane.
/// Throws Error(invalid_argument) for unequal counts or coincident points.
AlignResult align_rigid(const Centerline& moving, const Centerline& reference);

/// Rotation angle about z (radians) of a planar rotation matrix.
double planar_angle(const Mat3& rotation);

struct MeanAlignment {
  std::vector<Centerline> aligned;  // input order
  Centerline mean;
};

/// Aligns every centerline to the iteratively recomputed mean shape. The
/// initial reference is the unaligned mean; sums run in subject-id order so
/// the result does not depend on input order.
MeanAlignment align_to_mean(const std::vector<Centerline>& lines, int iterations = 2);

}  // namespace cohortlab::shape
