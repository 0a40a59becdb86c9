#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cohortlab/cohort/predicate.hpp"
#include "cohortlab/cohort/types.hpp"
#include "json.hpp"

namespace cohortlab::stats {

/// Two-sided normal quantile z_{(1 + confidence) / 2}.
/// Throws Error(invalid_argument) unless 0 < confidence < 1.
double z_quantile(double confidence);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for k successes out of n.
Interval wilson_interval(std::size_t k, std::size_t n, double confidence = 0.95);

struct ProportionEstimate {
  std::size_t k = 0;
  std::size_t n_used = 0;
  std::size_t n_missing = 0;
  double proportion = 0.0;
  Interval ci;
  double confidence = 0.95;
};

/// Throws Error(empty_input) for n = 0.
ProportionEstimate proportion(std::size_t k, std::size_t n, double confidence = 0.95);

/// Share of subjects meeting every condition. Subjects with a missing value in
/// a condition attribute (other than an is_missing condition) are excluded and counted.
ProportionEstimate prevalence(const cohort::Cohort& cohort, const std::vector<cohort::SelectionPredicate>& condition,
                              double confidence = 0.95);

struct IncidenceEstimate {
  std::size_t events = 0;
  double person_time = 0.0;
  double rate = 0.0;  // events per unit of person time
  Interval ci;        // exact Poisson (chi-square) limits; one-sided upper limit when events = 0
  double confidence = 0.95;
  std::size_t n_used = 0;
  std::size_t n_missing = 0;
};

/// Throws Error(zero_margin) for zero person time.
IncidenceEstimate incidence(std::size_t events, double person_time, double confidence = 0.95);

struct FollowUp {
  double entry = 0.0;
  double exit = 0.0;
  bool event = false;
};

/// Person time is the sum of exit - entry. Throws Error(invalid_argument) if exit < entry.
IncidenceEstimate incidence(const std::vector<FollowUp>& records, double confidence = 0.95);

/// Follow-up from a scalar time attribute (entry 0) and a binary event
/// attribute (category index 1 = event).
IncidenceEstimate incidence(const cohort::Cohort& cohort, const std::string& time_attribute,
                            const std::string& event_attribute, double confidence = 0.95);

nlohmann::json proportion_to_json(const ProportionEstimate& p);
nlohmann::json incidence_to_json(const IncidenceEstimate& e);

}  // namespace cohortlab::stats
