#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cohortlab/cohort/predicate.hpp"
#include "json.hpp"

namespace cohortlab::stats {

struct RateBin {
  double lower = 0.0;
  double upper = 0.0;
  double center = 0.0;
  std::size_t n = 0;
  std::size_t events = 0;
  double rate = 0.0;
};

/// r(x) = c0 + c1 x + c2 x^2 fitted by weighted least squares (weight = bin
/// size) to the event rates of equal-width bins over [min x, max x].
struct UShapeFit {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double se_c2 = 0.0;
  double t_c2 = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // one-sided, H1: c2 > 0
  std::optional<double> vertex;  // -c1 / (2 c2) when c2 != 0
  double r_squared = 0.0;        // weighted
  std::vector<RateBin> bins;
  std::size_t n_used = 0;
  std::size_t n_missing = 0;
};

/// Needs at least 10 complete pairs and 4 non-empty bins. Throws
/// Error(invalid_argument) when all x are identical or the sizes differ.
UShapeFit u_shape_fit(const std::vector<double>& x, const std::vector<bool>& outcome, std::size_t n_bins = 10);

/// x from a scalar attribute, outcome from a condition (conjunction).
UShapeFit u_shape_fit(const cohort::Cohort& cohort, const std::string& x_attribute,
                      const std::vector<cohort::SelectionPredicate>& outcome, std::size_t n_bins = 10);

nlohmann::json ushape_to_json(const UShapeFit& f);

}  // namespace cohortlab::stats
