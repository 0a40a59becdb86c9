#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cohortlab/cohort/predicate.hpp"
#include "cohortlab/stats/proportion.hpp"
#include "json.hpp"

namespace cohortlab::stats {

/// 2x2 table: a = exposed with event, b = exposed without, c = unexposed
/// with event, d = unexposed without.
struct RiskTable {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t c = 0;
  std::size_t d = 0;

  std::size_t total() const noexcept { return a + b + c + d; }
  RiskTable swapped() const noexcept { return {c, d, a, b}; }
};

struct RiskEstimate {
  double rr = 1.0;
  Interval ci;
  double confidence = 0.95;
  double log_se = 0.0;       // sqrt(1/a - 1/(a+b) + 1/c - 1/(c+d))
  double chi_square = 0.0;   // Pearson, 1 df, no continuity correction
  double p_value = 1.0;
  std::string classification;  // "protective" (RR < 1), "risk" (RR > 1), "neutral"
};

/// Throws Error(zero_margin) when a group is empty or has no events (the
/// log-scale interval is undefined); no continuity correction is applied.
RiskEstimate relative_risk(const RiskTable& table, double confidence = 0.95);

/// Pearson chi-square of a 2x2 table; 0 when a margin is empty.
double pearson_chi_square(const RiskTable& table);

struct CohortRiskTable {
  RiskTable table;
  std::size_t n_used = 0;
  std::size_t n_missing = 0;
};

/// Classifies each subject by the exposure and outcome conditions (each a
/// conjunction). Subjects with a missing value in any condition attribute are
/// excluded and counted.
CohortRiskTable risk_table(const cohort::Cohort& cohort, const std::vector<cohort::SelectionPredicate>& exposure,
                           const std::vector<cohort::SelectionPredicate>& outcome);

struct StratumRisk {
  std::string stratum;
  RiskTable table;
  std::optional<RiskEstimate> estimate;
  std::string excluded_reason;  // set when estimate is empty
};

struct Heterogeneity {
  double q = 0.0;  // Woolf: sum w_i (ln RR_i - ln RR_pooled)^2, w_i = 1 / se_i^2
  double df = 0.0;
  double p_value = 1.0;
  double pooled_rr = 1.0;
};

struct InteractionResult {
  std::string stratum_attribute;
  std::vector<StratumRisk> strata;
  std::optional<Heterogeneity> heterogeneity;  // needs at least two estimable strata
  std::size_t n_used = 0;
  std::size_t n_missing = 0;
  double confidence = 0.95;
};

/// Scalar stratum attributes need `bin_edges` (ascending; stratum i is
/// [edge_i, edge_i+1), the last bin closed); values outside are counted missing.
InteractionResult interaction_terms(const cohort::Cohort& cohort, const std::vector<cohort::SelectionPredicate>& outcome,
                                    const std::vector<cohort::SelectionPredicate>& exposure,
                                    const std::string& stratum_attribute, const std::vector<double>& bin_edges = {},
                                    double confidence = 0.95);

/// Woolf test over per-stratum estimates.
Heterogeneity woolf_heterogeneity(const std::vector<RiskEstimate>& estimates);

nlohmann::json risk_table_to_json(const RiskTable& t);
nlohmann::json risk_to_json(const RiskEstimate& r);
nlohmann::json interaction_to_json(const InteractionResult& r);

}  // namespace cohortlab::stats
