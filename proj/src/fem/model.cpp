#include "cohortlab/fem/model.hpp"

#include <cmath>
#include <set>

#include "cohortlab/digest.hpp"
#include "cohortlab/error.hpp"

namespace cohortlab::fem {

using nlohmann::json;

std::string_view to_string(NodeKind kind) noexcept {
  return kind == NodeKind::boundary ? "boundary" : "inner";
}

std::string_view to_string(ConnectionKind kind) noexcept {
  return kind == ConnectionKind::distance_constraint ? "distance_constraint" : "co_deformation";
}

namespace {

void check_material(double e, double nu, double rho, const std::string& where) {
  if (!(e > 0.0)) throw Error(ErrorCode::invalid_elasticity, where + ": youngs_modulus must be > 0");
  if (!(nu > -1.0 && nu < 0.5)) {
    throw Error(ErrorCode::invalid_elasticity, where + ": poissons_ratio must lie in (-1, 0.5)");
  }
  if (!(rho > 0.0)) throw Error(ErrorCode::invalid_elasticity, where + ": density must be > 0");
}

}  // namespace

void ShapeModel::validate() const {
  if (dim != 2 && dim != 3) throw Error(ErrorCode::invalid_argument, "model dim must be 2 or 3");
  if (nodes.empty()) throw Error(ErrorCode::invalid_argument, "model has no nodes");
  if (node_kind.size() != nodes.size()) {
    throw Error(ErrorCode::invalid_argument, "node_kind size does not match node count");
  }
  const int n = static_cast<int>(nodes.size());
  for (const auto& e : elements) {
    for (int k = 0; k < nodes_per_element(); ++k) {
      if (e[static_cast<std::size_t>(k)] < 0 || e[static_cast<std::size_t>(k)] >= n) {
        throw Error(ErrorCode::invalid_argument, "element references node out of range");
      }
    }
  }
  check_material(elasticity.youngs_modulus, elasticity.poissons_ratio, elasticity.density, "elasticity");
  if (elasticity.damping_alpha < 0.0 || elasticity.damping_beta < 0.0) {
    throw Error(ErrorCode::invalid_elasticity, "damping coefficients must be >= 0");
  }
  if (!subshapes.empty()) {
    std::vector<int> owner(nodes.size(), -1);
    for (std::size_t s = 0; s < subshapes.size(); ++s) {
      for (int node : subshapes[s].nodes) {
        if (node < 0 || node >= n) throw Error(ErrorCode::invalid_argument, "subshape node out of range");
        if (owner[static_cast<std::size_t>(node)] != -1) {
          throw Error(ErrorCode::invalid_argument, "subshapes '" + subshapes[static_cast<std::size_t>(owner[static_cast<std::size_t>(node)])].name +
                                                       "' and '" + subshapes[s].name + "' share a node");
        }
        owner[static_cast<std::size_t>(node)] = static_cast<int>(s);
      }
      if (subshapes[s].material) {
        const auto& m = *subshapes[s].material;
        check_material(m.youngs_modulus, m.poissons_ratio, m.density, "subshape '" + subshapes[s].name + "'");
      }
    }
    for (int o : owner) {
      if (o == -1) throw Error(ErrorCode::invalid_argument, "every node must belong to exactly one subshape");
    }
  }
  for (const auto& c : layer2) {
    const int ns = static_cast<int>(subshapes.size());
    if (c.a < 0 || c.a >= ns || c.b < 0 || c.b >= ns || c.a == c.b) {
      throw Error(ErrorCode::invalid_argument, "layer2 connection references invalid subshapes");
    }
    if (c.stiffness < 0.0) throw Error(ErrorCode::invalid_argument, "layer2 stiffness must be >= 0");
  }
  for (const auto& a : anchors) {
    if (a.element < 0 || a.element >= static_cast<int>(elements.size())) {
      throw Error(ErrorCode::invalid_argument, "anchor references element out of range");
    }
  }
}

std::vector<int> ShapeModel::node_subshape() const {
  std::vector<int> owner(nodes.size(), -1);
  for (std::size_t s = 0; s < subshapes.size(); ++s) {
    for (int node : subshapes[s].nodes) owner[static_cast<std::size_t>(node)] = static_cast<int>(s);
  }
  return owner;
}

const AppearanceParams& ShapeModel::appearance_of_subshape(int subshape) const {
  if (subshape >= 0 && subshapes[static_cast<std::size_t>(subshape)].appearance) {
    return *subshapes[static_cast<std::size_t>(subshape)].appearance;
  }
  return appearance;
}

ElasticityParams ShapeModel::material_of_subshape(int subshape) const {
  ElasticityParams p = elasticity;
  if (subshape >= 0 && subshapes[static_cast<std::size_t>(subshape)].material) {
    const auto& m = *subshapes[static_cast<std::size_t>(subshape)].material;
    p.youngs_modulus = m.youngs_modulus;
    p.poissons_ratio = m.poissons_ratio;
    p.density = m.density;
  }
  return p;
}

ShapeModel ShapeModel::posed(const Pose& pose) const {
  ShapeModel out = *this;
  for (auto& x : out.nodes) x = pose.apply(x);
  return out;
}

json appearance_to_json(const AppearanceParams& a) {
  json j{{"channel_weights", json::object()},
         {"expected_intensity", a.expected_intensity},
         {"gradient_gain", a.gradient_gain},
         {"intensity_gain", a.intensity_gain},
         {"smoothing_mm", a.smoothing_mm}};
  for (const auto& [k, v] : a.channel_weights) j["channel_weights"][k] = v;
  j["max_force"] = std::isfinite(a.max_force) ? json(a.max_force) : json(nullptr);
  return j;
}

AppearanceParams appearance_from_json(const json& j) {
  AppearanceParams a;
  if (j.contains("channel_weights")) {
    for (auto it = j.at("channel_weights").begin(); it != j.at("channel_weights").end(); ++it) {
      a.channel_weights[it.key()] = it.value().get<double>();
    }
  }
  a.expected_intensity = j.value("expected_intensity", 0.0);
  a.gradient_gain = j.value("gradient_gain", 0.0);
  a.intensity_gain = j.value("intensity_gain", 0.0);
  a.smoothing_mm = j.value("smoothing_mm", 0.0);
  if (j.contains("max_force") && !j.at("max_force").is_null()) a.max_force = j.at("max_force").get<double>();
  return a;
}

json model_to_json(const ShapeModel& m) {
  json nodes = json::array();
  for (const auto& x : m.nodes) {
    if (m.dim == 2) {
      nodes.push_back({x.x(), x.y()});
    } else {
      nodes.push_back({x.x(), x.y(), x.z()});
    }
  }
  json elements = json::array();
  for (const auto& e : m.elements) {
    json row = json::array();
    for (int k = 0; k < m.nodes_per_element(); ++k) row.push_back(e[static_cast<std::size_t>(k)]);
    elements.push_back(std::move(row));
  }
  json kinds = json::array();
  for (auto k : m.node_kind) kinds.push_back(to_string(k));
  json subshapes = json::array();
  for (const auto& s : m.subshapes) {
    json js{{"name", s.name}, {"role", s.role}, {"nodes", s.nodes}};
    if (s.appearance) js["appearance"] = appearance_to_json(*s.appearance);
    if (s.material) {
      js["material"] = {{"youngs_modulus", s.material->youngs_modulus},
                        {"poissons_ratio", s.material->poissons_ratio},
                        {"density", s.material->density}};
    }
    subshapes.push_back(std::move(js));
  }
  json layer2 = json::array();
  for (const auto& c : m.layer2) {
    layer2.push_back({{"a", c.a}, {"b", c.b}, {"kind", to_string(c.kind)}, {"stiffness", c.stiffness}});
  }
  json anchors = json::array();
  for (const auto& a : m.anchors) {
    json w = json::array();
    for (int k = 0; k < m.nodes_per_element(); ++k) w.push_back(a.weights[static_cast<std::size_t>(k)]);
    anchors.push_back({{"element", a.element}, {"weights", std::move(w)}});
  }
  return json{{"dim", m.dim},
              {"nodes", std::move(nodes)},
              {"elements", std::move(elements)},
              {"node_kind", std::move(kinds)},
              {"elasticity",
               {{"youngs_modulus", m.elasticity.youngs_modulus},
                {"poissons_ratio", m.elasticity.poissons_ratio},
                {"density", m.elasticity.density},
                {"damping_alpha", m.elasticity.damping_alpha},
                {"damping_beta", m.elasticity.damping_beta}}},
              {"appearance", appearance_to_json(m.appearance)},
              {"subshapes", std::move(subshapes)},
              {"layer2", std::move(layer2)},
              {"anchors", std::move(anchors)}};
}

ShapeModel model_from_json(const json& j) {
  ShapeModel m;
  try {
    m.dim = j.at("dim").get<int>();
    if (m.dim != 2 && m.dim != 3) throw Error(ErrorCode::parse_error, "model: dim must be 2 or 3");
    for (const auto& x : j.at("nodes")) {
      if (static_cast<int>(x.size()) != m.dim) throw Error(ErrorCode::parse_error, "model: node coordinate count != dim");
      m.nodes.emplace_back(x.at(0).get<double>(), x.at(1).get<double>(), m.dim == 3 ? x.at(2).get<double>() : 0.0);
    }
    for (const auto& e : j.at("elements")) {
      if (static_cast<int>(e.size()) != m.dim + 1) throw Error(ErrorCode::parse_error, "model: element arity != dim + 1");
      std::array<int, 4> el{-1, -1, -1, -1};
      for (std::size_t k = 0; k < e.size(); ++k) el[k] = e.at(k).get<int>();
      m.elements.push_back(el);
    }
    if (j.contains("node_kind")) {
      for (const auto& k : j.at("node_kind")) {
        const auto s = k.get<std::string>();
        if (s == "boundary") {
          m.node_kind.push_back(NodeKind::boundary);
        } else if (s == "inner") {
          m.node_kind.push_back(NodeKind::inner);
        } else {
          throw Error(ErrorCode::parse_error, "model: unknown node kind '" + s + "'");
        }
      }
    } else {
      m.node_kind.assign(m.nodes.size(), NodeKind::inner);
    }
    const auto& el = j.at("elasticity");
    m.elasticity.youngs_modulus = el.at("youngs_modulus").get<double>();
    m.elasticity.poissons_ratio = el.at("poissons_ratio").get<double>();
    m.elasticity.density = el.value("density", 1.0);
    m.elasticity.damping_alpha = el.value("damping_alpha", 0.0);
    m.elasticity.damping_beta = el.value("damping_beta", 0.0);
    if (j.contains("appearance")) m.appearance = appearance_from_json(j.at("appearance"));
    if (j.contains("subshapes")) {
      for (const auto& s : j.at("subshapes")) {
        Subshape sub;
        sub.name = s.at("name").get<std::string>();
        sub.role = s.value("role", std::string());
        sub.nodes = s.at("nodes").get<std::vector<int>>();
        if (s.contains("appearance")) sub.appearance = appearance_from_json(s.at("appearance"));
        if (s.contains("material")) {
          const auto& mj = s.at("material");
          sub.material = MaterialOverride{mj.at("youngs_modulus").get<double>(),
                                          mj.at("poissons_ratio").get<double>(), mj.value("density", 1.0)};
        }
        m.subshapes.push_back(std::move(sub));
      }
    }
    if (j.contains("layer2")) {
      for (const auto& c : j.at("layer2")) {
        Layer2Connection conn;
        conn.a = c.at("a").get<int>();
        conn.b = c.at("b").get<int>();
        const auto kind = c.at("kind").get<std::string>();
        if (kind == "distance_constraint") {
          conn.kind = ConnectionKind::distance_constraint;
        } else if (kind == "co_deformation") {
          conn.kind = ConnectionKind::co_deformation;
        } else {
          throw Error(ErrorCode::parse_error, "model: unknown connection kind '" + kind + "'");
        }
        conn.stiffness = c.at("stiffness").get<double>();
        m.layer2.push_back(conn);
      }
    }
    if (j.contains("anchors")) {
      for (const auto& a : j.at("anchors")) {
        BarycentricAnchor anchor;
        anchor.element = a.at("element").get<int>();
        const auto w = a.at("weights").get<std::vector<double>>();
        if (static_cast<int>(w.size()) != m.dim + 1) throw Error(ErrorCode::parse_error, "model: anchor weight count != dim + 1");
        std::copy(w.begin(), w.end(), anchor.weights.begin());
        m.anchors.push_back(anchor);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("model: ") + e.what());
  }
  m.validate();
  return m;
}

ShapeModel load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse_error, path + ": " + e.what());
  }
  return model_from_json(j);
}

void save_model(const std::string& path, const ShapeModel& model) {
  write_file(path, model_to_json(model).dump(1));
}

}  // namespace cohortlab::fem
