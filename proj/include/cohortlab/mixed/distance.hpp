#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cohortlab/cohort/types.hpp"
#include "json.hpp"

namespace cohortlab::mixed {

enum class ScalarNormalization { range, iqr };
enum class MissingPolicy { pairwise_exclude_renormalize, impute_max };

std::string_view to_string(ScalarNormalization n) noexcept;
std::string_view to_string(MissingPolicy p) noexcept;
ScalarNormalization parse_normalization(std::string_view text);
MissingPolicy parse_missing_policy(std::string_view text);

struct MixedDistanceSpec {
  std::vector<std::string> attributes;
  std::vector<double> weights;  // empty means 1 for every attribute
  ScalarNormalization normalization = ScalarNormalization::range;
  MissingPolicy missing_policy = MissingPolicy::pairwise_exclude_renormalize;

  /// Throws Error(unknown_attribute / invalid_argument).
  void validate(const cohort::DataDictionary& dictionary) const;
  double weight(std::size_t k) const { return weights.empty() ? 1.0 : weights[k]; }
};

nlohmann::json spec_to_json(const MixedDistanceSpec& spec);
MixedDistanceSpec spec_from_json(const nlohmann::json& j);

/// Per-attribute distances in [0, 1]:
///   nominal 0/1; ordinal |r_a - r_b| / (k - 1); scalar |x_a - x_b| / normalizer clipped to 1.
/// Scalar normalizers come from the records passed at construction.
class MixedMetric {
 public:
  MixedMetric(const cohort::DataDictionary& dictionary, MixedDistanceSpec spec,
              std::span<const cohort::SubjectRecord> records);

  /// Weighted mean of per-attribute distances; nullopt when no positive-weight
  /// attribute is present in both records (pairwise policy). Under impute_max an
  /// attribute missing on either side contributes 1. The same subject id gives 0.
  std::optional<double> operator()(const cohort::SubjectRecord& a, const cohort::SubjectRecord& b) const;

  /// Distance of one attribute; nullopt if either value is missing.
  std::optional<double> attribute_distance(std::size_t k, const cohort::Value& a, const cohort::Value& b) const;

  /// False when the record cannot take part (pairwise policy, no positive-weight value present).
  bool usable(const cohort::SubjectRecord& r) const;

  const MixedDistanceSpec& spec() const noexcept { return spec_; }
  const std::vector<double>& normalizers() const noexcept { return normalizers_; }

 private:
  MixedDistanceSpec spec_;
  std::vector<const cohort::AttributeDef*> defs_;
  std::vector<double> normalizers_;  // scalar attributes; 0 for categorical
};

/// Pairwise matrix over `records`; undefined pairs are +infinity.
Eigen::MatrixXd distance_matrix(const MixedMetric& metric, std::span<const cohort::SubjectRecord> records);

}  // namespace cohortlab::mixed
