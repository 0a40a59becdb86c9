#include "cohortlab/fem/modal.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

#include "cohortlab/error.hpp"

namespace cohortlab::fem {

double modal_residual(const FemSystem& system, const Eigen::VectorXd& eigenvalues, const Eigen::MatrixXd& modes) {
  const Eigen::MatrixXd r = system.stiffness * modes - system.mass * modes * eigenvalues.asDiagonal();
  const double k_norm = system.stiffness.norm();
  return k_norm > 0.0 ? r.norm() / k_norm : r.norm();
}

double m_orthonormality_error(const FemSystem& system, const Eigen::MatrixXd& modes) {
  const Eigen::MatrixXd g = modes.transpose() * system.mass * modes;
  return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).norm();
}

ModalBasis modal_decomposition(const FemSystem& system, double rigid_tolerance) {
  const Eigen::Index n = system.n_dof();
  if (n == 0) throw Error(ErrorCode::eigen_failure, "empty system");

  // Lumped M is diagonal: reduce to the standard symmetric problem
  // (M^-1/2 K M^-1/2) v = lambda v and map back with E = M^-1/2 V.
  const Eigen::VectorXd m = system.mass.diagonal();
  const bool diagonal = (system.mass - Eigen::MatrixXd(m.asDiagonal())).norm() == 0.0;
  ModalBasis basis;
  if (diagonal) {
    if ((m.array() <= 0.0).any()) throw Error(ErrorCode::eigen_failure, "mass matrix is not positive definite");
    const Eigen::VectorXd inv_sqrt = m.array().rsqrt();
    Eigen::MatrixXd a = inv_sqrt.asDiagonal() * system.stiffness * inv_sqrt.asDiagonal();
    a = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::eigen_failure, "symmetric eigen-solve did not converge");
    basis.eigenvalues = solver.eigenvalues();
    basis.eigenvectors = inv_sqrt.asDiagonal() * solver.eigenvectors();
  } else {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(system.stiffness, system.mass);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorCode::eigen_failure, "generalized eigen-solve failed (is M positive definite?)");
    }
    basis.eigenvalues = solver.eigenvalues();
    basis.eigenvectors = solver.eigenvectors();
  }

  const double max_eig = basis.eigenvalues.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (basis.eigenvalues(i) < rigid_tolerance * max_eig) ++basis.n_rigid;
  }
  basis.residual = modal_residual(system, basis.eigenvalues, basis.eigenvectors);
  basis.orthonormality = m_orthonormality_error(system, basis.eigenvectors);
  if (!(basis.residual < 1e-6) || !(basis.orthonormality < 1e-6)) {
    std::ostringstream msg;
    msg << "eigen-decomposition inaccurate: residual " << basis.residual << ", orthonormality "
        << basis.orthonormality;
    throw Error(ErrorCode::eigen_failure, msg.str());
  }
  return basis;
}

Eigen::Index truncation_count(const ModalBasis& basis, double fraction) {
  const Eigen::Index n = basis.size();
  const auto rigid = static_cast<Eigen::Index>(basis.n_rigid);
  if (fraction >= 1.0 || rigid >= n) return n;
  double total = 0.0;
  for (Eigen::Index i = rigid; i < n; ++i) total += 1.0 / basis.eigenvalues(i);
  double acc = 0.0;
  for (Eigen::Index i = rigid; i < n; ++i) {
    acc += 1.0 / basis.eigenvalues(i);
    if (acc >= fraction * total) return i + 1;
  }
  return n;
}

}  // namespace cohortlab::fem
