#pragma once

#include <Eigen/Core>
#include <memory>
#include <span>
#include <vector>

#include "cohortlab/cohort/image.hpp"
#include "cohortlab/fem/model.hpp"

namespace cohortlab::fem {

/// `linear` is bi/trilinear; `cubic` is separable Keys cubic convolution
/// (a = -1/2), which interpolates the samples and has a continuous gradient.
enum class Interpolation { linear, cubic };

std::string_view to_string(Interpolation method) noexcept;
Interpolation parse_interpolation(std::string_view text);

/// Scalar grid sampled in world coordinates (mm). Gradients are the exact
/// derivative of the interpolant; borders are clamped to the edge voxel.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(std::vector<double> data, std::array<std::size_t, 3> dims, std::array<double, 3> spacing,
              Interpolation method = Interpolation::cubic);

  struct Sample {
    double value = 0.0;
    Vec3 gradient = Vec3::Zero();
    bool inside = false;
  };
  Sample sample(const Vec3& x) const;
  bool inside(const Vec3& x) const;

  const std::vector<double>& data() const noexcept { return data_; }
  const std::array<std::size_t, 3>& dims() const noexcept { return dims_; }
  const std::array<double, 3>& spacing() const noexcept { return spacing_; }

  /// Central-difference gradient magnitude grid (one-sided at the border).
  ScalarField gradient_magnitude() const;

 private:
  std::vector<double> data_;
  std::array<std::size_t, 3> dims_{1, 1, 1};
  std::array<double, 3> spacing_{1, 1, 1};
  Interpolation method_ = Interpolation::cubic;
};

/// Weighted channel combination followed by optional smoothing.
ScalarField combined_image(const cohort::ImageVolume& image, const AppearanceParams& appearance,
                           Interpolation method = Interpolation::cubic);

struct ForceResult {
  Eigen::VectorXd forces;       // n_dof
  std::vector<bool> outside;    // per node
  std::size_t n_outside = 0;
};

/// Precomputes the appearance fields of every distinct subshape appearance so
/// repeated force evaluation during fitting is cheap.
class ImageForceModel {
 public:
  ImageForceModel(const ShapeModel& model, const cohort::ImageVolume& image,
                  Interpolation method = Interpolation::cubic);

  /// Boundary node: gradient_gain * grad |grad I|. Inner node:
  /// -intensity_gain * grad (I - expected)^2. Per-node norm clamped to max_force;
  /// nodes outside the image get zero force and are flagged.
  ForceResult compute(std::span<const Vec3> positions) const;

  /// Intensity penalty intensity_gain * (I(x) - expected)^2 of an inner node.
  double inner_penalty(std::size_t node, const Vec3& x) const;

 private:
  struct Channel {
    const AppearanceParams* appearance = nullptr;
    ScalarField intensity;
    ScalarField magnitude;
  };
  int dim_ = 2;
  std::vector<NodeKind> node_kind_;
  std::vector<int> node_channel_;
  std::vector<Channel> channels_;
  std::vector<AppearanceParams> appearances_;
};

/// Convenience wrapper: one-shot force evaluation for `positions`.
ForceResult image_forces(const ShapeModel& model, std::span<const Vec3> positions, const cohort::ImageVolume& image,
                         Interpolation method = Interpolation::cubic);

}  // namespace cohortlab::fem
