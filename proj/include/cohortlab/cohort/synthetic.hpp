#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cohortlab/cohort/image.hpp"
#include "cohortlab/cohort/types.hpp"
#include "cohortlab/geometry.hpp"
#include "json.hpp"

namespace cohortlab::cohort {

inline constexpr std::size_t kCenterlinePoints = 93;

struct TissueIntensity {
  double t1 = 0.0;
  double t2 = 0.0;
};

/// Sagittal lumbar-spine phantom layout (mm). x runs anterior, y runs caudal.
/// The canal centerline is x(s) = origin_x + sum_k a_k sin(k pi s),
/// y(s) = origin_y + s * canal_length for s in [0, 1].
struct SpineAnatomy {
  double origin_x = 40.0;
  double origin_y = 22.0;
  double canal_length = 168.0;
  double canal_half_width = 4.5;
  int n_vertebrae = 5;
  double vertebra_offset = 24.0;       // canal centerline to vertebra center, along the anterior normal
  double vertebra_half_width = 14.0;   // along the anterior normal
  double vertebra_half_height = 12.0;  // along the canal tangent
  double mean_lordosis = 10.0;         // a_1 of the cohort mean shape
  std::array<std::size_t, 2> image_dims{112, 212};
  double spacing = 1.0;
  double edge_blur_mm = 1.5;
  TissueIntensity background{400, 300};
  TissueIntensity vertebra{800, 450};
  TissueIntensity disc{350, 600};
  TissueIntensity canal{150, 900};

  using Shape = std::array<double, 3>;  // a_1..a_3

  Vec3 canal_point(const Shape& a, double s) const;
  Vec3 canal_tangent(const Shape& a, double s) const;  // unit, pointing caudal
  Vec3 anterior_normal(const Shape& a, double s) const;
  /// Arc-length parameters of `n` points spaced uniformly along the canal.
  std::vector<double> arc_length_parameters(const Shape& a, std::size_t n) const;
  Vec3 pivot() const { return {origin_x, origin_y + 0.5 * canal_length, 0.0}; }
};

enum class NoiseLevel { low, medium, high };
std::string_view to_string(NoiseLevel level) noexcept;
NoiseLevel parse_noise_level(std::string_view text);
double noise_sd(NoiseLevel level) noexcept;

struct SyntheticSpec {
  std::size_t n_subjects = 49;
  std::size_t n_clusters = 1;
  NoiseLevel noise = NoiseLevel::low;
  double female_fraction = 0.5;
  double missing_rate = 0.03;
  double class_amplitude_mm = 14.0;
  double curvature_loss_per_cm = 0.008;  // fraction of shape amplitude lost per cm of height above 170 cm
  double class_height_shift_cm = 6.0;    // mean height offset of the straightest (+) and most bent (-) class
  double shape_jitter_mm = 0.5;   // per-subject sd of each shape coefficient
  double pose_jitter_mm = 3.0;
  double pose_jitter_deg = 2.0;
  bool render_images = true;
  SpineAnatomy anatomy;
};

nlohmann::json spec_to_json(const SyntheticSpec& spec);
SyntheticSpec spec_from_json(const nlohmann::json& j);

struct VertebraTruth {
  Vec3 center = Vec3::Zero();
  Vec3 axis_normal = Vec3::UnitX();   // unit, anterior
  Vec3 axis_tangent = Vec3::UnitY();  // unit, caudal
  double half_width = 0.0;
  double half_height = 0.0;

  bool contains(const Vec3& p) const;
};

struct SubjectTruth {
  std::string id;
  int cluster = 0;
  SpineAnatomy::Shape shape{};
  double pose_angle = 0.0;          // radians, about SpineAnatomy::pivot()
  Vec3 pose_translation = Vec3::Zero();
  std::vector<VertebraTruth> vertebrae;
  std::vector<Vec3> centerline;     // kCenterlinePoints, z = 0

  Pose pose(const SpineAnatomy& anatomy) const {
    return Pose::planar(pose_angle, anatomy.pivot(), pose_translation);
  }
};

struct PlantedCorrelation {
  std::string a;
  std::string b;
  int sign = 1;
};

struct GroundTruth {
  std::vector<SubjectTruth> subjects;
  std::vector<PlantedCorrelation> correlations;
  std::vector<SpineAnatomy::Shape> class_shapes;
};

nlohmann::json ground_truth_to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

struct SyntheticData {
  Cohort cohort;
  std::vector<ImageVolume> images;  // one per subject (empty if render_images == false)
  GroundTruth truth;
};

/// Attribute schema of generated cohorts.
DataDictionary synthetic_dictionary();

/// Deterministic for a fixed (spec, seed). Throws Error(invalid_argument) for
/// zero subjects or zero clusters.
SyntheticData generate_synthetic_cohort(const SyntheticSpec& spec, std::uint64_t seed);

/// Shape coefficients of the planted centerline class `k` (class 0 is the mean shape).
SpineAnatomy::Shape class_shape(std::size_t k, std::size_t n_clusters, const SpineAnatomy& anatomy,
                                double amplitude);

/// Noise-free rendering of one subject's phantom (used by the generator before noise).
ImageVolume render_phantom(const SpineAnatomy& anatomy, const SubjectTruth& truth);

}  // namespace cohortlab::cohort
