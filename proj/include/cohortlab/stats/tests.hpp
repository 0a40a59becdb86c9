#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cohortlab/cohort/types.hpp"
#include "json.hpp"

namespace cohortlab::stats {

struct ChiSquareResult {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  double cramers_v = 0.0;
  std::size_t n = 0;
};

/// Pearson chi-square of independence (no continuity correction). Empty rows
/// and columns are dropped; throws Error(invalid_argument) if fewer than two remain.
ChiSquareResult chi_square_test(const Eigen::MatrixXd& counts);

struct RankTestResult {
  std::string test;
  double statistic = 0.0;  // U of the first group, or H
  double z = 0.0;          // Mann-Whitney only
  double df = 0.0;         // Kruskal-Wallis only
  double p_value = 1.0;
  std::string effect_size_name;
  double effect_size = 0.0;
};

/// Two-sided normal approximation with tie correction. Rank-biserial
/// r = 2 U1 / (n1 n2) - 1, positive when the first group tends to be larger.
RankTestResult mann_whitney(const std::vector<double>& x, const std::vector<double>& y);

/// Tie-corrected H, chi-square(k - 1) p-value, effect size epsilon^2 = H / (n - 1).
RankTestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Group index per subject (nullopt = not grouped) plus group names.
struct Grouping {
  std::vector<std::optional<int>> group;
  std::vector<std::string> names;
};

/// Grouping by a categorical attribute.
Grouping grouping_from_attribute(const cohort::Cohort& cohort, const std::string& attribute);

struct GroupSignificance {
  std::string attribute;
  std::string test;
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  std::string effect_size_name;
  double effect_size = 0.0;
  std::vector<std::pair<std::string, std::size_t>> groups;  // groups entering the test
  std::vector<std::string> dropped_groups;                 // fewer than two values
  std::size_t n_used = 0;
  std::size_t n_missing = 0;
};

/// Categorical attribute: chi-square + Cramer's V. Ordinal or scalar: Mann-Whitney
/// + rank-biserial for two groups, Kruskal-Wallis + epsilon^2 for more.
/// Throws Error(empty_input) unless at least two groups have two or more values.
GroupSignificance group_significance(const cohort::Cohort& cohort, const Grouping& grouping,
                                     const std::string& attribute);

nlohmann::json significance_to_json(const GroupSignificance& g);

}  // namespace cohortlab::stats
