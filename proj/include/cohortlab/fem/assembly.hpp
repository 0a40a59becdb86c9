#pragma once

#include <Eigen/Dense>
#include <span>

#include "cohortlab/fem/model.hpp"

namespace cohortlab::fem {

/// Dense global matrices over dof ordering (node0.x, node0.y[, node0.z], node1.x, ...).
struct FemSystem {
  int dim = 2;
  Eigen::MatrixXd stiffness;  // K
  Eigen::MatrixXd mass;       // M, diagonal (lumped)
  Eigen::MatrixXd damping;    // D = alpha M + beta K

  Eigen::Index n_dof() const noexcept { return stiffness.rows(); }
};

/// Isotropic constitutive matrix: plane strain (3x3) in 2D, 6x6 in 3D.
Eigen::MatrixXd constitutive_matrix(int dim, double youngs_modulus, double poissons_ratio);

/// Signed measure (area in 2D, volume in 3D) of an element.
double element_measure(int dim, std::span<const Vec3> vertices);

/// Constant-strain element stiffness, (dim*(dim+1)) square. Throws
/// Error(degenerate_element) for zero area/volume.
Eigen::MatrixXd element_stiffness(int dim, std::span<const Vec3> vertices, const ElasticityParams& material);

/// Row-sum lumped mass per element node (same value for each node).
double element_lumped_mass(int dim, std::span<const Vec3> vertices, double density);

FemSystem assemble_system(const ShapeModel& model);

/// Linearized axial springs from the centroid of each subshape to every node
/// of the other one. Row r maps u -> e_r . (u_node - u_centroid), e_r being the
/// rest direction; rows are scaled by 1/sqrt(row count) so the stiffness of
/// the connection does not grow with the node count.
Eigen::MatrixXd distance_constraint_rows(const ShapeModel& model, int a, int b);

/// Linear map u -> vec(F_a - F_b), F_s being the least-squares displacement
/// gradient of subshape s. Rows: dim * dim.
Eigen::MatrixXd co_deformation_rows(const ShapeModel& model, int a, int b);

}  // namespace cohortlab::fem
