#include "cohortlab/shape/ribbon.hpp"

#include <algorithm>

#include "cohortlab/error.hpp"

namespace cohortlab::shape {

using nlohmann::json;

RibbonGeometry ribbon_geometry(const ShapeClustering& clustering, const std::vector<Centerline>& lines, Plane plane,
                               const RibbonOptions& options) {
  if (clustering.labels.size() != lines.size()) {
    throw Error(ErrorCode::invalid_argument, "clustering and centerlines differ in length");
  }
  const double norm = plane.normal.norm();
  if (norm == 0.0) throw Error(ErrorCode::invalid_argument, "plane normal is zero");
  plane.normal /= norm;
  RibbonGeometry out;
  out.plane = plane;
  if (clustering.sizes.empty()) return out;
  const double max_size = static_cast<double>(*std::max_element(clustering.sizes.begin(), clustering.sizes.end()));
  for (std::size_t k = 0; k < clustering.n_clusters(); ++k) {
    Ribbon r;
    r.cluster = static_cast<int>(k);
    r.size = clustering.sizes[k];
    r.representative = clustering.representatives.at(k);
    const auto& line = lines.at(r.representative);
    r.subject_id = line.subject_id;
    r.polyline = line.points;
    r.width = options.min_width + (options.max_width - options.min_width) * static_cast<double>(r.size) / max_size;
    for (const auto& p : line.points) {
      const double d = plane.normal.dot(p - plane.point);
      r.color.push_back(d);
      r.shadow.push_back(p - d * plane.normal);
    }
    out.ribbons.push_back(std::move(r));
  }
  return out;
}

json ribbon_to_json(const RibbonGeometry& g) {
  auto pts = [](const std::vector<Vec3>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back({p.x(), p.y(), p.z()});
    return a;
  };
  json ribbons = json::array();
  for (const auto& r : g.ribbons) {
    ribbons.push_back({{"cluster", r.cluster},
                       {"size", r.size},
                       {"representative", r.representative},
                       {"subject_id", r.subject_id},
                       {"width", r.width},
                       {"polyline", pts(r.polyline)},
                       {"color", r.color},
                       {"shadow", pts(r.shadow)}});
  }
  return json{{"plane", {{"point", {g.plane.point.x(), g.plane.point.y(), g.plane.point.z()}},
                         {"normal", {g.plane.normal.x(), g.plane.normal.y(), g.plane.normal.z()}}}},
              {"ribbons", ribbons}};
}

}  // namespace cohortlab::shape
