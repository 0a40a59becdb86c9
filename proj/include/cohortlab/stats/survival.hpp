#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cohortlab/cohort/types.hpp"
#include "json.hpp"

namespace cohortlab::stats {

struct SurvivalRecord {
  double time = 0.0;
  bool event = false;  // false = censored
};

/// Product-limit curve evaluated at the distinct event times. S(t) is right
/// continuous: the value at times[i] holds until times[i + 1].
struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  std::vector<std::optional<double>> log_se;  // Greenwood se of log S; undefined once S = 0
  std::vector<std::size_t> at_risk;
  std::vector<std::size_t> events;
  std::vector<double> censor_times;  // one entry per censored subject, ascending
  std::size_t n = 0;
  std::size_t n_events = 0;
  std::size_t n_missing = 0;
  double confidence = 0.95;

  /// S(t) for any t >= 0.
  double at(double t) const;
};

/// Kaplan-Meier estimator with Greenwood variance. The band is
/// S exp(+-z se_log) clipped to [0, 1]. Censored subjects at an event time
/// are still at risk for that time. Throws Error(empty_input) / Error(invalid_argument) for negative times.
SurvivalCurve kaplan_meier(const std::vector<SurvivalRecord>& records, double confidence = 0.95);

/// Time from a scalar attribute, event = category index 1 of a binary attribute.
SurvivalCurve kaplan_meier(const cohort::Cohort& cohort, const std::string& time_attribute,
                           const std::string& event_attribute, double confidence = 0.95);

nlohmann::json survival_to_json(const SurvivalCurve& c);

}  // namespace cohortlab::stats
