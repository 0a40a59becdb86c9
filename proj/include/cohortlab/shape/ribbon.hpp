#pragma once

#include <vector>

#include "cohortlab/shape/centerline.hpp"
#include "cohortlab/shape/cluster.hpp"
#include "json.hpp"

namespace cohortlab::shape {

/// Reference plane through `point` with unit `normal`. The default is the
/// sagittal image plane of the 2D phantoms (z = 0).
struct Plane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

struct RibbonOptions {
  double min_width = 2.0;
  double max_width = 12.0;
};

struct Ribbon {
  int cluster = 0;
  std::size_t size = 0;
  std::size_t representative = 0;
  std::string subject_id;
  std::vector<Vec3> polyline;
  double width = 0.0;
  std::vector<double> color;   // signed distance to the plane per point
  std::vector<Vec3> shadow;    // orthogonal projection onto the plane
};

struct RibbonGeometry {
  Plane plane;
  std::vector<Ribbon> ribbons;  // one per cluster, label order
};

/// width = min + (max - min) * size / max_size.
/// Throws Error(invalid_argument) if the clustering does not match `lines`
/// or the plane normal is zero.
RibbonGeometry ribbon_geometry(const ShapeClustering& clustering, const std::vector<Centerline>& lines,
                               Plane plane = {}, const RibbonOptions& options = {});

nlohmann::json ribbon_to_json(const RibbonGeometry& g);

}  // namespace cohortlab::shape
