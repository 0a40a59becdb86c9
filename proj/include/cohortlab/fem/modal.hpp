#pragma once

#include <Eigen/Dense>

#include "cohortlab/fem/assembly.hpp"

namespace cohortlab::fem {

/// Generalized eigen-decomposition K E = M E Lambda with E^T M E = I,
/// eigenvalues ascending. Rigid modes are those with
/// eigenvalue < rigid_tolerance * max eigenvalue.
struct ModalBasis {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // columns are modes
  std::size_t n_rigid = 0;
  double residual = 0.0;         // ||K E - M E Lambda||_F / ||K||_F
  double orthonormality = 0.0;   // ||E^T M E - I||_F

  Eigen::Index size() const noexcept { return eigenvalues.size(); }
};

inline constexpr double kRigidTolerance = 1e-9;

/// Throws Error(eigen_failure) if the solver fails or M is not positive definite.
ModalBasis modal_decomposition(const FemSystem& system, double rigid_tolerance = kRigidTolerance);

double modal_residual(const FemSystem& system, const Eigen::VectorXd& eigenvalues, const Eigen::MatrixXd& modes);
double m_orthonormality_error(const FemSystem& system, const Eigen::MatrixXd& modes);

/// Number of leading modes to keep so the retained deformation modes cover
/// at least `fraction` of the total inverse-eigenvalue weight (rigid modes
/// are always kept). fraction >= 1 keeps everything.
Eigen::Index truncation_count(const ModalBasis& basis, double fraction);

}  // namespace cohortlab::fem
