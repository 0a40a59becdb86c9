#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cohortlab/cohort/image.hpp"
#include "cohortlab/cohort/synthetic.hpp"
#include "cohortlab/fem/forces.hpp"
#include "cohortlab/fem/modal.hpp"

namespace cohortlab::fem {

struct FitOptions {
  double dt_factor = 0.4;            // dt = dt_factor / sqrt(lambda_max)
  double dt = 0.0;                   // explicit step; overrides dt_factor when > 0
  double convergence_voxels = 1e-3;  // max node step per iteration
  int convergence_steps = 10;        // consecutive quiet steps required
  int max_steps = 10000;
  double mode_fraction = 1.0;        // inverse-eigenvalue weight of deformation modes kept
  bool record_trajectory = false;
  Interpolation interpolation = Interpolation::cubic;
};

/// Per-mode amplitudes a = E^T M u of the total displacement u (model frame)
/// and the energy split into rigid, major and minor deformation modes.
struct QualityOfFit {
  std::vector<double> modal_amplitude;
  double rigid_part = 0.0;
  double major_part = 0.0;
  double minor_part = 0.0;
  double total = 0.0;
  std::size_t n_major = 0;
  double score = 1.0;
};

struct FitResult {
  std::vector<Vec3> final_positions;  // image space (mm)
  std::vector<std::vector<double>> trajectory;  // per-step modal coordinates, when recorded
  bool converged = false;
  int steps = 0;
  double elapsed_seconds = 0.0;
  double dt = 0.0;
  double last_step_voxels = 0.0;
  std::size_t modes_used = 0;
  std::size_t n_outside = 0;  // nodes outside the image at the final step
  Eigen::VectorXd displacement;  // model-frame displacement of the final state
  QualityOfFit quality;
};

/// Assembled system and modal basis of a prototype. Fitting reuses it across
/// images because the dynamics run in the model frame.
struct PreparedModel {
  ShapeModel model;
  FemSystem system;
  ModalBasis basis;
};

PreparedModel prepare_model(const ShapeModel& model);

/// Integrates the modal equations of motion q'' + (alpha + beta lambda) q' +
/// lambda q = E^T f(x) with the linear part taken implicitly and the image
/// forces explicitly. Forces are pulled back to the model frame through the
/// pose rotation; positions are reported in image space.
FitResult fit(const PreparedModel& prepared, const cohort::ImageVolume& image, const Pose& init_pose,
              const FitOptions& options = {});
FitResult fit(const ShapeModel& model, const cohort::ImageVolume& image, const Pose& init_pose,
              const FitOptions& options = {});

/// Penalty reference length (mm) of the quality score.
inline constexpr double kQualityScaleMm = 5.0;

/// score = exp(-sum_deform (lambda_i / lambda_first) a_i^2 / (m_total s^2)).
/// Major modes are the leading deformation modes covering 90% of the
/// inverse-eigenvalue weight.
QualityOfFit quality_of_fit(const FemSystem& system, const ModalBasis& basis, const Eigen::VectorXd& displacement,
                            double scale_mm = kQualityScaleMm);

struct DetectionResult {
  std::vector<std::string> names;
  std::vector<Vec3> centers;
  std::optional<std::vector<bool>> success;  // present when ground truth is supplied

  bool all_successful() const;
};

/// Centers are the mean node position of every subshape with role "vertebra",
/// in subshape order. With ground truth, center k is tested against vertebra k.
DetectionResult detect_vertebrae(const ShapeModel& model, const std::vector<Vec3>& fitted_positions,
                                 const std::vector<cohort::VertebraTruth>* truth = nullptr);

nlohmann::json quality_to_json(const QualityOfFit& q);
nlohmann::json fit_to_json(const FitResult& r, bool include_trace = false);
nlohmann::json detection_to_json(const DetectionResult& d);

}  // namespace cohortlab::fem
