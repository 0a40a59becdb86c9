#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cohortlab/cohort/types.hpp"
#include "json.hpp"

namespace cohortlab::cohort {

/// Linear-interpolation quantile (R type 7) of already sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

struct FiveNumber {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Throws Error(empty_input) on an empty span.
FiveNumber five_number_summary(std::span<const double> values);

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;                  // sample (n - 1) standard deviation
  std::optional<double> skewness;   // g1 = m3 / m2^1.5; undefined for constant data or n < 2
  std::optional<double> kurtosis;   // excess, g2 = m4 / m2^2 - 3; same conditions
};

Moments moments(std::span<const double> values);

struct FrequencyEntry {
  std::string category;
  std::size_t count = 0;
};

struct SummaryStats {
  std::string attribute;
  AttributeKind kind = AttributeKind::scalar;
  std::size_t n_used = 0;
  std::size_t n_missing = 0;
  // scalar only
  std::optional<Moments> moments;
  std::optional<FiveNumber> quartiles;
  // nominal / ordinal only
  std::vector<FrequencyEntry> frequencies;
};

/// Throws Error(unknown_attribute).
SummaryStats attribute_summary(const Cohort& cohort, std::string_view attribute);

nlohmann::json summary_to_json(const SummaryStats& s);

/// Non-missing numeric values (scalar value, rank, or category index) in subject order.
std::vector<double> numeric_values(const Cohort& cohort, std::string_view attribute,
                                   std::size_t* n_missing = nullptr);

}  // namespace cohortlab::cohort
