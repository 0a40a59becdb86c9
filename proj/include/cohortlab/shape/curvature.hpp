#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cohortlab/cohort/types.hpp"
#include "cohortlab/shape/centerline.hpp"
#include "json.hpp"

namespace cohortlab::shape {

struct CurvatureProfile {
  std::vector<double> curvature;  // 1/mm per point
  double mean = 0.0;
  double max = 0.0;
  double arc_length = 0.0;
};

/// Discrete curvature 1/R of the circle through each consecutive point triple;
/// the end points take the value of their interior neighbour.
/// Throws Error(invalid_argument) for fewer than 3 points or repeated points.
CurvatureProfile curvature_profile(const std::vector<Vec3>& points);

/// Bins [start + k width, start + (k + 1) width). With count = 0 the bins
/// extend until the largest observed value is covered.
struct BinSpec {
  double start = 150.0;
  double width = 10.0;
  std::size_t count = 0;
};

struct CurvatureBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> sd;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

/// Monotone trend: Spearman rank correlation between bin index and
/// per-subject mean curvature, two-sided p from the t approximation.
struct TrendTest {
  double rho = 0.0;
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  std::string direction;  // "decreasing", "increasing" or "flat"
};

struct GroupCurvatureResult {
  std::string attribute;
  BinSpec bins_spec;
  double confidence = 0.95;
  std::vector<CurvatureBin> bins;
  std::size_t n_used = 0;
  std::size_t n_missing = 0;       // no attribute value or no centerline
  std::size_t n_out_of_bins = 0;   // value below the first bin or beyond a fixed count
  std::optional<TrendTest> trend;  // needs at least two non-empty bins
};

/// `values` and `mean_curvatures` are parallel; nullopt values count as missing.
GroupCurvatureResult group_curvature_analysis(const std::vector<std::optional<double>>& values,
                                              const std::vector<double>& mean_curvatures, const BinSpec& bins,
                                              double confidence = 0.95);

/// Joins centerlines to subjects by id; subjects without a centerline count as missing.
GroupCurvatureResult group_curvature_analysis(const cohort::Cohort& cohort, const std::vector<Centerline>& lines,
                                              const std::string& attribute, const BinSpec& bins,
                                              double confidence = 0.95);

/// Spearman correlation with mid-ranks for ties.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

nlohmann::json curvature_to_json(const CurvatureProfile& p);
nlohmann::json group_curvature_to_json(const GroupCurvatureResult& r);

}  // namespace cohortlab::shape
