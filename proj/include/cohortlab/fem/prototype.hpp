#pragma once

#include "cohortlab/cohort/synthetic.hpp"
#include "cohortlab/fem/model.hpp"

namespace cohortlab::fem {

/// Layout and material parameters of the two-layer lumbar-spine prototype.
struct SpinePrototypeOptions {
  int vertebra_grid = 4;             // nodes per side of each vertebra grid
  double vertebra_coverage = 0.8;    // grid extent relative to the vertebra extent
  int canal_rows = 29;
  double canal_column_offset = 3.0;  // mm, left/right columns around the midline
  ElasticityParams elasticity{2000.0, 0.3, 1.0, 20.0, 0.0};
  AppearanceParams vertebra_appearance;
  AppearanceParams canal_appearance;
  double distance_stiffness = 20.0;
  double co_deformation_stiffness = 100.0;
  std::size_t anchors = cohort::kCenterlinePoints;

  SpinePrototypeOptions();
};

/// Builds the prototype in the model frame of the cohort mean shape: one inner-node
/// triangle grid per vertebra, a three-column canal band, distance springs
/// from the canal to every vertebra and between neighbours, co-deformation
/// between neighbouring vertebrae and barycentric centerline anchors spaced
/// uniformly by arc length.
ShapeModel build_spine_prototype(const cohort::SpineAnatomy& anatomy, const SpinePrototypeOptions& options = {});

/// Smooth two-channel image whose appearance optimum coincides with the
/// prototype placed at `pose`: each element is filled with its subshape's
/// expected intensity split across channels in proportion to the weights.
cohort::ImageVolume render_prototype(const ShapeModel& model, const Pose& pose, std::array<std::size_t, 3> dims,
                                     std::array<double, 3> spacing);

/// Anchor positions of `model` for node positions `positions`.
std::vector<Vec3> anchor_positions(const ShapeModel& model, const std::vector<Vec3>& positions);

}  // namespace cohortlab::fem
