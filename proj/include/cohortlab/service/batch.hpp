#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohortlab/cohort/synthetic.hpp"
#include "cohortlab/fem/fit.hpp"
#include "cohortlab/shape/centerline.hpp"
#include "json.hpp"

namespace cohortlab::service {

/// Writes dictionary.json, cohort.csv, truth.json, centerlines_truth.csv,
/// images/<id>.* (when rendered) and, if `model_path` is non-empty, the
/// matching prototype model. Returns a summary with file digests.
nlohmann::json generate_files(const cohort::SyntheticSpec& spec, std::uint64_t seed, const std::string& out_dir,
                              const std::string& model_path);

struct FitStageOptions {
  double offset_mm = 5.0;  // initial translation offset, direction 2 pi i / n
  fem::FitOptions fit;
  std::size_t limit = 0;   // 0 fits every subject
};

/// Fits `model` to images/<id> of every subject. With ground truth the
/// initial pose is the true pose plus the offset and detection is scored;
/// without it the fit starts from the model pose.
/// Output: {"subjects": [{subject_id, fit, detection, success?}], "detection": {...}}.
nlohmann::json fit_subjects(const fem::ShapeModel& model, const std::vector<std::string>& subject_ids,
                            const std::string& images_dir, const cohort::GroundTruth* truth,
                            const FitStageOptions& options);

/// Centerlines through the fitted anchors, sorted by subject id.
std::vector<shape::Centerline> centerlines_from_fits(const fem::ShapeModel& model, const nlohmann::json& fits);

struct BatchResult {
  int exit_code = 0;
  std::string failed_stage;
  std::string message;
  nlohmann::json report;  // also written to <out_dir>/report.json
};

/// Runs generate/ingest -> fit -> centerlines -> cluster -> stats -> report.
/// Relative paths in `config` resolve against `base_dir`. Never throws for
/// stage failures: the result names the stage and exit_code is 3.
BatchResult run_batch(const nlohmann::json& config, const std::string& base_dir, const std::string& out_dir,
                      std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace cohortlab::service
