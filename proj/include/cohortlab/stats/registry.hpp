#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cohortlab/cohort/types.hpp"
#include "cohortlab/mixed/run.hpp"
#include "cohortlab/shape/centerline.hpp"
#include "json.hpp"

namespace cohortlab::stats {

/// Lookups the registry may need beyond the cohort.
struct EstimatorContext {
  std::function<const mixed::ClusterRun*(const std::string& run_id)> find_run;
  const std::vector<shape::Centerline>* centerlines = nullptr;
};

/// Names accepted by evaluate_estimator, sorted.
std::vector<std::string> estimator_names();

/// Evaluates `name` over `cohort` with JSON parameters. The result echoes the
/// estimator and its parameters and always carries n_used / n_missing.
/// Throws Error(unknown_estimator) for an unregistered name.
nlohmann::json evaluate_estimator(const std::string& name, const nlohmann::json& params, const cohort::Cohort& cohort,
                                  const EstimatorContext& context = {});

}  // namespace cohortlab::stats
