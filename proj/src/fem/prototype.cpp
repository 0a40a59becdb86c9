#include "cohortlab/fem/prototype.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "cohortlab/error.hpp"

namespace cohortlab::fem {

namespace {

// Barycentric coordinates of p in triangle (a, b, c), 2D.
std::array<double, 3> barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
  const double l1 = ((p.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (p.y() - a.y())) / det;
  const double l2 = ((b.x() - a.x()) * (p.y() - a.y()) - (p.x() - a.x()) * (b.y() - a.y())) / det;
  return {1.0 - l1 - l2, l1, l2};
}

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

double triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const auto w = barycentric(p, a, b, c);
  if (w[0] >= 0.0 && w[1] >= 0.0 && w[2] >= 0.0) return 0.0;
  return std::min({segment_distance(p, a, b), segment_distance(p, b, c), segment_distance(p, c, a)});
}

// Appends a rows x cols grid of nodes and its triangulation; returns node ids.
std::vector<int> add_grid(ShapeModel& m, const std::vector<std::vector<Vec3>>& grid) {
  const auto rows = grid.size();
  const auto cols = grid.front().size();
  const int base = static_cast<int>(m.nodes.size());
  std::vector<int> ids;
  for (const auto& row : grid) {
    for (const auto& p : row) {
      ids.push_back(static_cast<int>(m.nodes.size()));
      m.nodes.push_back(p);
      m.node_kind.push_back(NodeKind::inner);
    }
  }
  auto id = [&](std::size_t r, std::size_t c) { return base + static_cast<int>(r * cols + c); };
  for (std::size_t r = 0; r + 1 < rows; ++r) {
    for (std::size_t c = 0; c + 1 < cols; ++c) {
      m.elements.push_back({id(r, c), id(r, c + 1), id(r + 1, c + 1), 0});
      m.elements.push_back({id(r, c), id(r + 1, c + 1), id(r + 1, c), 0});
    }
  }
  return ids;
}

AppearanceParams default_appearance(double t1, double t2, double expected) {
  AppearanceParams a;
  a.channel_weights = {{"T1", t1}, {"T2", t2}};
  a.expected_intensity = expected;
  a.intensity_gain = 0.1;
  a.max_force = 100.0;
  a.smoothing_mm = 1.5;
  return a;
}

}  // namespace

SpinePrototypeOptions::SpinePrototypeOptions()
    : vertebra_appearance(default_appearance(0.6, 0.4, 660.0)),
      canal_appearance(default_appearance(0.2, 0.8, 750.0)) {}

ShapeModel build_spine_prototype(const cohort::SpineAnatomy& an, const SpinePrototypeOptions& opt) {
  if (opt.vertebra_grid < 2 || opt.canal_rows < 2) {
    throw Error(ErrorCode::invalid_argument, "prototype grids need at least two nodes per side");
  }
  const cohort::SpineAnatomy::Shape shape{an.mean_lordosis, 0.0, 0.0};
  ShapeModel m;
  m.dim = 2;
  m.elasticity = opt.elasticity;
  m.appearance = opt.vertebra_appearance;

  const auto g = static_cast<std::size_t>(opt.vertebra_grid);
  for (int k = 0; k < an.n_vertebrae; ++k) {
    const double s = (k + 0.5) / an.n_vertebrae;
    const Vec3 t = an.canal_tangent(shape, s);
    const Vec3 n = an.anterior_normal(shape, s);
    const Vec3 center = an.canal_point(shape, s) + an.vertebra_offset * n;
    std::vector<std::vector<Vec3>> grid(g, std::vector<Vec3>(g));
    for (std::size_t r = 0; r < g; ++r) {
      for (std::size_t c = 0; c < g; ++c) {
        const double u = -1.0 + 2.0 * static_cast<double>(c) / static_cast<double>(g - 1);
        const double v = -1.0 + 2.0 * static_cast<double>(r) / static_cast<double>(g - 1);
        grid[r][c] = center + opt.vertebra_coverage * (u * an.vertebra_half_width * n + v * an.vertebra_half_height * t);
      }
    }
    Subshape sub;
    sub.name = "L" + std::to_string(k + 1);
    sub.role = "vertebra";
    sub.nodes = add_grid(m, grid);
    sub.appearance = opt.vertebra_appearance;
    m.subshapes.push_back(std::move(sub));
  }

  const auto rows = static_cast<std::size_t>(opt.canal_rows);
  const std::vector<double> params = an.arc_length_parameters(shape, rows);
  std::vector<std::vector<Vec3>> band(rows, std::vector<Vec3>(3));
  for (std::size_t r = 0; r < rows; ++r) {
    const Vec3 p = an.canal_point(shape, params[r]);
    const Vec3 n = an.anterior_normal(shape, params[r]);
    for (std::size_t c = 0; c < 3; ++c) band[r][c] = p + (static_cast<double>(c) - 1.0) * opt.canal_column_offset * n;
  }
  const std::size_t first_canal_element = m.elements.size();
  Subshape canal;
  canal.name = "canal";
  canal.role = "canal";
  canal.nodes = add_grid(m, band);
  canal.appearance = opt.canal_appearance;
  m.subshapes.push_back(std::move(canal));
  const int canal_index = static_cast<int>(m.subshapes.size()) - 1;

  for (int k = 0; k < an.n_vertebrae; ++k) {
    if (opt.distance_stiffness > 0.0) {
      m.layer2.push_back({canal_index, k, ConnectionKind::distance_constraint, opt.distance_stiffness});
      if (k + 1 < an.n_vertebrae) m.layer2.push_back({k, k + 1, ConnectionKind::distance_constraint, opt.distance_stiffness});
    }
    if (opt.co_deformation_stiffness > 0.0 && k + 1 < an.n_vertebrae) {
      m.layer2.push_back({k, k + 1, ConnectionKind::co_deformation, opt.co_deformation_stiffness});
    }
  }

  for (double s : an.arc_length_parameters(shape, opt.anchors)) {
    const Vec3 p = an.canal_point(shape, s);
    BarycentricAnchor best;
    double best_min = -std::numeric_limits<double>::infinity();
    for (std::size_t e = first_canal_element; e < m.elements.size(); ++e) {
      const auto& el = m.elements[e];
      const auto w = barycentric(p, m.nodes[static_cast<std::size_t>(el[0])], m.nodes[static_cast<std::size_t>(el[1])],
                                 m.nodes[static_cast<std::size_t>(el[2])]);
      const double worst = std::min({w[0], w[1], w[2]});
      if (worst > best_min) {
        best_min = worst;
        best.element = static_cast<int>(e);
        best.weights = {w[0], w[1], w[2], 0.0};
      }
    }
    m.anchors.push_back(best);
  }
  m.validate();
  return m;
}

std::vector<Vec3> anchor_positions(const ShapeModel& model, const std::vector<Vec3>& positions) {
  std::vector<Vec3> out;
  out.reserve(model.anchors.size());
  for (const auto& a : model.anchors) {
    const auto& el = model.elements.at(static_cast<std::size_t>(a.element));
    Vec3 p = Vec3::Zero();
    for (int v = 0; v < model.nodes_per_element(); ++v) {
      p += a.weights[static_cast<std::size_t>(v)] * positions.at(static_cast<std::size_t>(el[static_cast<std::size_t>(v)]));
    }
    out.push_back(p);
  }
  return out;
}

cohort::ImageVolume render_prototype(const ShapeModel& model, const Pose& pose, std::array<std::size_t, 3> dims,
                                     std::array<double, 3> spacing) {
  if (model.dim != 2 || dims[2] != 1) throw Error(ErrorCode::invalid_argument, "render_prototype supports 2D models");
  const std::vector<int> owner = model.node_subshape();
  const std::vector<Vec3> posed = transform_points(pose, model.nodes);
  std::set<std::string, std::less<>> channel_names;
  const auto n_sub = std::max<std::size_t>(model.subshapes.size(), 1);
  for (std::size_t s = 0; s < n_sub; ++s) {
    for (const auto& [name, w] : model.appearance_of_subshape(model.subshapes.empty() ? -1 : static_cast<int>(s)).channel_weights) {
      channel_names.insert(name);
    }
  }
  // Per-subshape channel values T_c = expected * w_c / |w|^2 give a combined
  // intensity equal to the expected one under that subshape's own weights.
  std::vector<std::map<std::string, double, std::less<>>> fill(n_sub);
  for (std::size_t s = 0; s < n_sub; ++s) {
    const auto& a = model.appearance_of_subshape(model.subshapes.empty() ? -1 : static_cast<int>(s));
    double w2 = 0.0;
    for (const auto& [name, w] : a.channel_weights) w2 += w * w;
    for (const auto& [name, w] : a.channel_weights) fill[s][name] = w2 > 0.0 ? a.expected_intensity * w / w2 : 0.0;
  }

  cohort::ImageVolume img;
  img.dims = dims;
  img.spacing = spacing;
  std::map<std::string, std::vector<float>, std::less<>> data;
  for (const auto& name : channel_names) data[name].assign(dims[0] * dims[1], 0.0f);
  for (std::size_t j = 0; j < dims[1]; ++j) {
    for (std::size_t i = 0; i < dims[0]; ++i) {
      const Vec3 p(static_cast<double>(i) * spacing[0], static_cast<double>(j) * spacing[1], 0.0);
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_sub = 0;
      for (const auto& el : model.elements) {
        const double d = triangle_distance(p, posed[static_cast<std::size_t>(el[0])], posed[static_cast<std::size_t>(el[1])],
                                           posed[static_cast<std::size_t>(el[2])]);
        if (d < best) {
          best = d;
          best_sub = owner.empty() || owner[static_cast<std::size_t>(el[0])] < 0 ? 0 : static_cast<std::size_t>(owner[static_cast<std::size_t>(el[0])]);
        }
      }
      for (const auto& [name, value] : fill[best_sub]) data[name][i + dims[0] * j] = static_cast<float>(value);
    }
  }
  for (auto& [name, values] : data) img.set_channel(name, std::move(values));
  return img;
}

}  // namespace cohortlab::fem
