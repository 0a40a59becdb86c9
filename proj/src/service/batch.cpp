#include "cohortlab/service/batch.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>

#include "cohortlab/cohort/io.hpp"
#include "cohortlab/digest.hpp"
#include "cohortlab/error.hpp"
#include "cohortlab/fem/prototype.hpp"
#include "cohortlab/mixed/run.hpp"
#include "cohortlab/service/engine.hpp"
#include "cohortlab/stats/registry.hpp"
#include "cohortlab/version.hpp"

namespace cohortlab::service {

namespace fs = std::filesystem;
using nlohmann::json;

json generate_files(const cohort::SyntheticSpec& spec, std::uint64_t seed, const std::string& out_dir,
                    const std::string& model_path) {
  fs::create_directories(out_dir);
  const auto data = cohort::generate_synthetic_cohort(spec, seed);
  const fs::path dir(out_dir);
  const auto dict = cohort::dictionary_to_json(data.cohort.dictionary).dump(2) + "\n";
  const auto csv = cohort::format_cohort(data.cohort);
  std::vector<shape::Centerline> lines;
  for (const auto& t : data.truth.subjects) lines.push_back({t.id, t.centerline});
  const auto centerlines = shape::format_centerlines(lines);
  write_file((dir / "dictionary.json").string(), dict);
  write_file((dir / "cohort.csv").string(), csv);
  write_file((dir / "truth.json").string(), cohort::ground_truth_to_json(data.truth).dump() + "\n");
  write_file((dir / "centerlines_truth.csv").string(), centerlines);
  if (!data.images.empty()) {
    fs::create_directories(dir / "images");
    for (std::size_t i = 0; i < data.images.size(); ++i) {
      cohort::write_image_raw((dir / "images").string(), data.cohort.subjects[i].id, data.images[i]);
    }
  }
  json out{{"seed", seed},
           {"spec", cohort::spec_to_json(spec)},
           {"n_subjects", data.cohort.subjects.size()},
           {"n_images", data.images.size()},
           {"cohort_digest", cohort::cohort_digest(data.cohort)},
           {"files",
            {{"dictionary.json", sha256_hex(dict)},
             {"cohort.csv", sha256_hex(csv)},
             {"centerlines_truth.csv", sha256_hex(centerlines)}}}};
  if (!model_path.empty()) {
    const auto model = fem::build_spine_prototype(spec.anatomy);
    fem::save_model(model_path, model);
    out["model"] = {{"file", fs::path(model_path).filename().string()},
                    {"digest", sha256_hex(fem::model_to_json(model).dump())}};
  }
  return out;
}

json fit_subjects(const fem::ShapeModel& model, const std::vector<std::string>& subject_ids,
                  const std::string& images_dir, const cohort::GroundTruth* truth, const FitStageOptions& options) {
  const auto prepared = fem::prepare_model(model);
  std::map<std::string, const cohort::SubjectTruth*, std::less<>> by_id;
  if (truth) {
    for (const auto& t : truth->subjects) by_id[t.id] = &t;
  }
  const cohort::SpineAnatomy anatomy;
  const std::size_t n = options.limit > 0 ? std::min(options.limit, subject_ids.size()) : subject_ids.size();
  json subjects = json::array();
  std::size_t n_success = 0, n_converged = 0;
  double max_seconds = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = subject_ids[i];
    const auto image = cohort::read_image_raw(images_dir, id);
    Pose init;
    const cohort::SubjectTruth* t = nullptr;
    if (truth) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw Error(ErrorCode::not_found, "no ground truth for " + id);
      t = it->second;
      init = t->pose(anatomy);
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      init.translation += Vec3(options.offset_mm * std::cos(angle), options.offset_mm * std::sin(angle), 0.0);
    }
    const auto r = fem::fit(prepared, image, init, options.fit);
    const auto d = fem::detect_vertebrae(model, r.final_positions, t ? &t->vertebrae : nullptr);
    json s{{"subject_id", id}, {"fit", fem::fit_to_json(r)}, {"detection", fem::detection_to_json(d)}};
    if (t) {
      s["success"] = d.all_successful();
      n_success += d.all_successful();
    }
    n_converged += r.converged;
    max_seconds = std::max(max_seconds, r.elapsed_seconds);
    subjects.push_back(std::move(s));
  }
  json summary{{"n", n}, {"n_converged", n_converged}, {"slowest_fit", {{"elapsed_seconds", max_seconds}}}, {"offset_mm", options.offset_mm}};
  if (truth) {
    summary["n_success"] = n_success;
    summary["success_rate"] = n > 0 ? static_cast<double>(n_success) / static_cast<double>(n) : 0.0;
  }
  return json{{"subjects", subjects}, {"detection", summary}};
}

std::vector<shape::Centerline> centerlines_from_fits(const fem::ShapeModel& model, const json& fits) {
  std::vector<shape::Centerline> lines;
  for (const auto& s : fits.at("subjects")) {
    std::vector<Vec3> pos;
    for (const auto& p : s.at("fit").at("final_positions")) pos.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    lines.push_back(shape::extract_centerline(model, pos, s.at("subject_id").get<std::string>()));
  }
  std::sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
  return lines;
}

namespace {

struct StageFailure : std::runtime_error {
  StageFailure(std::string s, const std::string& m) : std::runtime_error(m), stage(std::move(s)) {}
  std::string stage;
};

template <class F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure(name, e.what());
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).string();
}

bool has(const std::vector<std::string>& v, const char* s) { return std::find(v.begin(), v.end(), s) != v.end(); }

}  // namespace

BatchResult run_batch(const json& config, const std::string& base_dir, const std::string& out_dir,
                      std::optional<std::uint64_t> seed_override) {
  BatchResult result;
  json report{{"report_type", "batch"},
              {"engine", {{"name", kEngineName}, {"version", kEngineVersion}}},
              {"config_digest", json_digest(config)}};
  const fs::path out(out_dir);
  std::vector<std::string> done;
  try {
    stage("config", [&] {
      fs::create_directories(out);
      return 0;
    });
    const std::uint64_t seed = seed_override ? *seed_override : config.value("seed", std::uint64_t{7});
    report["seed"] = seed;
    const bool generate = config.contains("generate");
    std::vector<std::string> stages;
    if (config.contains("stages")) {
      stages = stage("config", [&] { return config["stages"].get<std::vector<std::string>>(); });
    } else {
      stages = {generate ? "generate" : "ingest", "fit", "centerlines", "cluster", "stats", "report"};
    }

    std::string dict_path, csv_path, truth_path, images_dir, centerlines_path;
    std::string model_path = resolve(base_dir, config.value("model", std::string()));
    if (generate) {
      stage("generate", [&] {
        const auto& g = config["generate"];
        const auto spec = cohort::spec_from_json(g.value("spec", json::object()));
        if (model_path.empty()) model_path = (out / "model.json").string();
        report["generate"] = generate_files(spec, seed, out_dir, config.contains("model") ? std::string() : model_path);
        return 0;
      });
      done.push_back("generate");
      dict_path = (out / "dictionary.json").string();
      csv_path = (out / "cohort.csv").string();
      truth_path = (out / "truth.json").string();
      images_dir = (out / "images").string();
      centerlines_path = (out / "centerlines_truth.csv").string();
    } else {
      const auto c = config.value("cohort", json::object());
      dict_path = resolve(base_dir, c.value("dictionary", std::string()));
      csv_path = resolve(base_dir, c.value("csv", std::string()));
      truth_path = resolve(base_dir, c.value("truth", std::string()));
      images_dir = resolve(base_dir, c.value("images_dir", std::string()));
      centerlines_path = resolve(base_dir, c.value("centerlines", std::string()));
    }

    const auto ingested = stage("ingest", [&] {
      const auto dict = cohort::load_dictionary(dict_path);
      return cohort::load_cohort(csv_path, dict);
    });
    if (!generate) done.push_back("ingest");
    const auto& cohort_data = ingested.cohort;
    std::vector<std::string> ids;
    for (const auto& s : cohort_data.subjects) ids.push_back(s.id);
    report["data"] = {{"cohort_digest", cohort::cohort_digest(cohort_data)},
                      {"n_subjects", cohort_data.subjects.size()},
                      {"ingest_stats", cohort::ingest_stats_to_json(ingested.stats)}};

    std::optional<cohort::GroundTruth> truth;
    if (!truth_path.empty() && fs::exists(truth_path)) {
      truth = stage("ingest", [&] { return cohort::ground_truth_from_json(json::parse(read_file(truth_path))); });
    }

    std::optional<fem::ShapeModel> model;
    json fits;
    if (has(stages, "fit")) {
      fits = stage("fit", [&] {
        if (model_path.empty()) throw Error(ErrorCode::invalid_argument, "no model file configured");
        if (!fs::exists(model_path)) throw Error(ErrorCode::io_error, "model file not found: " + model_path);
        model = fem::load_model(model_path);
        if (images_dir.empty()) throw Error(ErrorCode::invalid_argument, "no images directory configured");
        const auto f = config.value("fit", json::object());
        FitStageOptions o;
        o.offset_mm = f.value("offset_mm", o.offset_mm);
        o.limit = f.value("limit", std::size_t{0});
        o.fit.mode_fraction = f.value("mode_fraction", o.fit.mode_fraction);
        o.fit.max_steps = f.value("max_steps", o.fit.max_steps);
        return fit_subjects(*model, ids, images_dir, truth ? &*truth : nullptr, o);
      });
      write_file((out / "fits.json").string(), fits.dump() + "\n");
      report["detection"] = fits["detection"];
      done.push_back("fit");
    }

    std::vector<shape::Centerline> lines;
    std::string source = config.value("centerlines", json::object()).value("source", std::string());
    if (has(stages, "centerlines")) {
      lines = stage("centerlines", [&] {
        if (source.empty()) source = has(stages, "fit") ? "fitted" : "file";
        if (source == "fitted") {
          if (!model) throw Error(ErrorCode::invalid_argument, "fitted centerlines need the fit stage");
          return centerlines_from_fits(*model, fits);
        }
        if (source != "file" && source != "truth") throw Error(ErrorCode::invalid_argument, "unknown centerline source " + source);
        if (centerlines_path.empty()) throw Error(ErrorCode::invalid_argument, "no centerline file configured");
        auto l = shape::read_centerlines(centerlines_path);
        std::sort(l.begin(), l.end(), [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
        return l;
      });
      const auto text = shape::format_centerlines(lines);
      write_file((out / "centerlines.csv").string(), text);
      report["centerlines"] = {{"source", source}, {"n", lines.size()}, {"digest", sha256_hex(text)}};
      done.push_back("centerlines");
    }

    std::map<std::string, mixed::ClusterRun, std::less<>> runs;
    json run_summaries = json::array();
    if (has(stages, "cluster")) {
      stage("cluster", [&] {
        fs::create_directories(out / "runs");
        std::size_t k = 0;
        for (const auto& req : config.value("cluster", json::array())) {
          const auto run_id = "run-" + std::to_string(++k);
          auto run = mixed::run_clustering(req, cohort_data, lines.empty() ? nullptr : &lines);
          const auto rep = mixed::cluster_report(run, json{{"cohort_digest", cohort::cohort_digest(cohort_data)},
                                                           {"run_id", run_id}});
          write_file((out / "runs" / (run_id + ".json")).string(), rep.dump(2) + "\n");
          run_summaries.push_back({{"run_id", run_id},
                                   {"algorithm", req.at("algorithm")},
                                   {"run_hash", run.run_hash},
                                   {"n_clusters", run.n_clusters},
                                   {"n_noise", run.n_noise},
                                   {"cluster_sizes", run.cluster_sizes}});
          runs.emplace(run_id, std::move(run));
        }
        return 0;
      });
      report["runs"] = run_summaries;
      done.push_back("cluster");
    }

    if (has(stages, "stats")) {
      json results = json::array(), summaries = json::array();
      stage("stats", [&] {
        stats::EstimatorContext ctx;
        ctx.find_run = [&](const std::string& id) -> const mixed::ClusterRun* {
          const auto it = runs.find(id);
          return it == runs.end() ? nullptr : &it->second;
        };
        ctx.centerlines = lines.empty() ? nullptr : &lines;
        for (const auto& q : config.value("stats", json::array())) {
          const auto name = q.at("estimator").get<std::string>();
          const auto r = stats::evaluate_estimator(name, q.value("params", json::object()), cohort_data, ctx);
          const auto digest = stats_output_digest(name, r);
          results.push_back({{"estimator", name}, {"output", r}, {"output_digest", digest}});
          summaries.push_back({{"estimator", name}, {"output_digest", digest}});
        }
        return 0;
      });
      write_file((out / "stats.json").string(), results.dump(2) + "\n");
      report["stats"] = summaries;
      done.push_back("stats");
    }
    report["stages"] = done;
    report["status"] = "ok";
    if (has(stages, "report")) done.push_back("report");
    report["stages"] = done;
  } catch (const StageFailure& f) {
    result.exit_code = 3;
    result.failed_stage = f.stage;
    result.message = f.what();
    report["stages"] = done;
    report["status"] = "failed";
    report["failed_stage"] = f.stage;
    report["error"] = f.what();
  }
  report["report_digest"] = json_digest(strip_volatile(report));
  report["timestamp"] = utc_now();
  result.report = report;
  try {
    write_file((out / "report.json").string(), report.dump(2) + "\n");
  } catch (const std::exception& e) {
    if (result.exit_code == 0) {
      result.exit_code = 3;
      result.failed_stage = "report";
      result.message = e.what();
    }
  }
  return result;
}

}  // namespace cohortlab::service
