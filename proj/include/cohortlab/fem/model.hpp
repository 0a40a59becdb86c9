#pragma once

#include <array>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cohortlab/geometry.hpp"
#include "json.hpp"

namespace cohortlab::fem {

enum class NodeKind { boundary, inner };

/// Linear isotropic elasticity (plane strain in 2D) with Rayleigh damping
/// D = damping_alpha * M + damping_beta * K.
struct ElasticityParams {
  double youngs_modulus = 1.0;
  double poissons_ratio = 0.3;
  double density = 1.0;
  double damping_alpha = 0.0;
  double damping_beta = 0.0;
};

/// Image appearance driving the external forces. The combined image is
/// sum_i channel_weights[i] * channel_i, optionally Gaussian-smoothed.
struct AppearanceParams {
  std::map<std::string, double, std::less<>> channel_weights;
  double expected_intensity = 0.0;   // inner-node attraction target
  double gradient_gain = 0.0;        // boundary nodes: ascent on |grad I|
  double intensity_gain = 0.0;       // inner nodes: descent on (I - expected)^2
  double max_force = std::numeric_limits<double>::infinity();  // per-node force norm clamp
  double smoothing_mm = 0.0;
};

/// Material override for one subshape. Damping coefficients stay global so
/// the Rayleigh form (and modal decoupling) is preserved.
struct MaterialOverride {
  double youngs_modulus = 1.0;
  double poissons_ratio = 0.3;
  double density = 1.0;
};

struct Subshape {
  std::string name;
  std::string role;  // "vertebra", "canal", or free text
  std::vector<int> nodes;
  std::optional<AppearanceParams> appearance;
  std::optional<MaterialOverride> material;
};

enum class ConnectionKind { distance_constraint, co_deformation };

/// Second-layer coupling between two subshapes (indices into ShapeModel::subshapes).
struct Layer2Connection {
  int a = 0;
  int b = 0;
  ConnectionKind kind = ConnectionKind::distance_constraint;
  double stiffness = 0.0;
};

/// Point fixed to an element by barycentric weights (dim + 1 used).
struct BarycentricAnchor {
  int element = 0;
  std::array<double, 4> weights{};
};

struct ShapeModel {
  int dim = 2;
  std::vector<Vec3> nodes;                   // mm, model space; z = 0 in 2D
  std::vector<std::array<int, 4>> elements;  // triangles use the first three indices
  std::vector<NodeKind> node_kind;
  ElasticityParams elasticity;
  AppearanceParams appearance;
  std::vector<Subshape> subshapes;
  std::vector<Layer2Connection> layer2;
  std::vector<BarycentricAnchor> anchors;

  int nodes_per_element() const noexcept { return dim + 1; }
  std::size_t n_dof() const noexcept { return static_cast<std::size_t>(dim) * nodes.size(); }

  /// Throws Error(invalid_argument / invalid_elasticity) on structural violations.
  void validate() const;

  /// Subshape index per node, or -1 when the model has no subshapes.
  std::vector<int> node_subshape() const;
  const AppearanceParams& appearance_of_subshape(int subshape) const;
  ElasticityParams material_of_subshape(int subshape) const;

  /// Copy with node positions moved by `pose`.
  ShapeModel posed(const Pose& pose) const;
};

std::string_view to_string(NodeKind kind) noexcept;
std::string_view to_string(ConnectionKind kind) noexcept;

nlohmann::json model_to_json(const ShapeModel& model);
ShapeModel model_from_json(const nlohmann::json& j);
ShapeModel load_model(const std::string& path);
void save_model(const std::string& path, const ShapeModel& model);

nlohmann::json appearance_to_json(const AppearanceParams& a);
AppearanceParams appearance_from_json(const nlohmann::json& j);

}  // namespace cohortlab::fem
