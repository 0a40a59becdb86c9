// cohortlab command-line front end: single-stage subcommands, the batch
// pipeline (`run`) and the HTTP service (`serve`).

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cohortlab/cohort/io.hpp"
#include "cohortlab/cohort/synthetic.hpp"
#include "cohortlab/digest.hpp"
#include "cohortlab/error.hpp"
#include "cohortlab/fem/model.hpp"
#include "cohortlab/mixed/run.hpp"
#include "cohortlab/service/batch.hpp"
#include "cohortlab/service/engine.hpp"
#include "cohortlab/service/http.hpp"
#include "cohortlab/stats/registry.hpp"
#include "cohortlab/version.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cohortlab;

namespace {

// JSON config files for CLI11: top-level keys set global options, objects
// named after a subcommand set that subcommand's options.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static void flatten(const json& j, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it->is_object() && parents.empty()) {
        auto p = parents;
        p.push_back(it.key());
        flatten(*it, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (it->is_array()) {
        for (const auto& v : *it) item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      } else if (it->is_string()) {
        item.inputs.push_back(it->get<std::string>());
      } else if (it->is_boolean()) {
        item.inputs.push_back(it->get<bool>() ? "true" : "false");
      } else {
        item.inputs.push_back(it->dump());
      }
      out.push_back(std::move(item));
    }
  }
};

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, path + ": " + e.what());
  }
}

json parse_inline(const std::string& text) {
  if (text.empty()) return json::object();
  if (fs::exists(text)) return read_json(text);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, "inline JSON: " + std::string(e.what()));
  }
}

void write_out(const std::string& out_dir, const std::string& name, const json& j) {
  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / name).string(), j.dump(2) + "\n");
}

cohort::Cohort load_data(const std::string& dictionary, const std::string& csv) {
  return cohort::load_cohort(csv, cohort::load_dictionary(dictionary)).cohort;
}

std::vector<shape::Centerline> load_lines(const std::string& path) {
  if (path.empty()) return {};
  auto lines = shape::read_centerlines(path);
  std::sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
  return lines;
}

std::pair<std::string, int> split_listen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) return {"127.0.0.1", std::stoi(listen)};
  return {listen.substr(0, colon), std::stoi(listen.substr(colon + 1))};
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cohortlab: cohort analytics engine"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config; for `run` the batch pipeline description");
  app.allow_config_extras(CLI::config_extras_mode::ignore);
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kEngineName) + " " + kEngineVersion);

  std::uint64_t seed = 7;
  std::string out_dir = ".";
  auto* seed_opt = app.add_option("--seed", seed, "random seed")->capture_default_str();
  app.add_option("--out-dir", out_dir, "directory for written artifacts")->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic cohort, ground truth, images and model");
  std::string spec_path;
  std::size_t n_subjects = 0, n_clusters = 0;
  std::string noise;
  bool no_images = false, no_model = false;
  gen->add_option("--spec", spec_path, "synthetic spec JSON file");
  gen->add_option("--subjects", n_subjects, "number of subjects");
  gen->add_option("--clusters", n_clusters, "planted centerline classes");
  gen->add_option("--noise", noise, "low | medium | high");
  gen->add_flag("--no-images", no_images, "skip phantom rendering");
  gen->add_flag("--no-model", no_model, "skip writing model.json");

  // ingest
  auto* ing = app.add_subcommand("ingest", "validate a cohort file against its dictionary");
  std::string dict_path, csv_path, lines_path;
  ing->add_option("--dictionary", dict_path, "dictionary JSON")->required();
  ing->add_option("--csv", csv_path, "cohort CSV")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "fit the shape model to subject images");
  std::string model_path, images_dir, truth_path;
  double offset_mm = 5.0, mode_fraction = 1.0;
  std::size_t limit = 0;
  fit->add_option("--model", model_path, "model JSON")->required();
  fit->add_option("--images-dir", images_dir, "directory with <id>.hdr.json images")->required();
  fit->add_option("--dictionary", dict_path, "dictionary JSON")->required();
  fit->add_option("--csv", csv_path, "cohort CSV (subject ids)")->required();
  fit->add_option("--truth", truth_path, "ground truth JSON; enables detection scoring");
  fit->add_option("--offset-mm", offset_mm, "initial pose offset with ground truth")->capture_default_str();
  fit->add_option("--mode-fraction", mode_fraction, "retained modal weight")->capture_default_str();
  fit->add_option("--limit", limit, "fit only the first N subjects");

  // centerlines
  auto* cl = app.add_subcommand("centerlines", "extract centerlines from fits");
  std::string fits_path;
  cl->add_option("--model", model_path, "model JSON")->required();
  cl->add_option("--fits", fits_path, "fits.json from `fit`")->required();

  // cluster
  auto* clu = app.add_subcommand("cluster", "run one clustering and write its report");
  std::string request_text, algorithm, params_text;
  clu->add_option("--dictionary", dict_path, "dictionary JSON")->required();
  clu->add_option("--csv", csv_path, "cohort CSV")->required();
  clu->add_option("--centerlines", lines_path, "centerline CSV (shape clustering)");
  clu->add_option("--request", request_text, "request JSON (file or inline) with algorithm and params");
  clu->add_option("--algorithm", algorithm, "mixed_dbscan | mixed_hierarchical | shape_hierarchical");
  clu->add_option("--params", params_text, "parameters JSON (file or inline)");

  // stats
  auto* st = app.add_subcommand("stats", "evaluate one estimator");
  std::string estimator;
  std::vector<std::string> report_paths;
  st->add_option("--dictionary", dict_path, "dictionary JSON")->required();
  st->add_option("--csv", csv_path, "cohort CSV")->required();
  st->add_option("--centerlines", lines_path, "centerline CSV");
  st->add_option("--estimator", estimator, "estimator name")->required();
  st->add_option("--params", params_text, "parameters JSON (file or inline)");
  st->add_option("--report", report_paths, "cluster reports usable as run ids (file stem)");

  // report
  auto* rep = app.add_subcommand("report", "verify a cluster report by replaying it");
  std::string report_path;
  rep->add_option("--report", report_path, "cluster report JSON")->required();
  rep->add_option("--dictionary", dict_path, "dictionary JSON")->required();
  rep->add_option("--csv", csv_path, "cohort CSV")->required();
  rep->add_option("--centerlines", lines_path, "centerline CSV");

  // replay
  auto* rpl = app.add_subcommand("replay", "replay a session archive against data files");
  std::string archive_path;
  rpl->add_option("--archive", archive_path, "session archive JSON")->required();
  rpl->add_option("--dictionary", dict_path, "dictionary JSON")->required();
  rpl->add_option("--csv", csv_path, "cohort CSV")->required();
  rpl->add_option("--centerlines", lines_path, "centerline CSV");

  // run
  auto* run = app.add_subcommand("run", "run the batch pipeline described by --config");

  // serve
  auto* srv = app.add_subcommand("serve", "serve the /v1 HTTP API");
  std::string listen = env_or("COHORTLAB_LISTEN", "127.0.0.1:8080");
  std::string data_dir = env_or("COHORTLAB_DATA_DIR", "");
  srv->add_option("--listen", listen, "host:port (env COHORTLAB_LISTEN)")->capture_default_str();
  srv->add_option("--data-dir", data_dir, "directory of the session store (env COHORTLAB_DATA_DIR); empty keeps it in memory");

  CLI11_PARSE(app, argc, argv);

  std::string stage_name = app.get_subcommands().front()->get_name();
  try {
    if (*gen) {
      cohort::SyntheticSpec spec = spec_path.empty() ? cohort::SyntheticSpec{} : cohort::spec_from_json(read_json(spec_path));
      if (n_subjects) spec.n_subjects = n_subjects;
      if (n_clusters) spec.n_clusters = n_clusters;
      if (!noise.empty()) spec.noise = cohort::parse_noise_level(noise);
      if (no_images) spec.render_images = false;
      const auto model_out = no_model ? std::string() : (fs::path(out_dir) / "model.json").string();
      const auto summary = service::generate_files(spec, seed, out_dir, model_out);
      std::cout << summary.dump(2) << "\n";
      return 0;
    }
    if (*ing) {
      const auto dict = cohort::load_dictionary(dict_path);
      const auto r = cohort::load_cohort(csv_path, dict);
      const json out{{"n_subjects", r.cohort.subjects.size()},
                     {"cohort_digest", cohort::cohort_digest(r.cohort)},
                     {"ingest_stats", cohort::ingest_stats_to_json(r.stats)}};
      if (app.get_option("--out-dir")->count() > 0) write_out(out_dir, "ingest.json", out);
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*fit) {
      if (!fs::exists(model_path)) throw Error(ErrorCode::io_error, "model file not found: " + model_path);
      const auto model = fem::load_model(model_path);
      const auto data = load_data(dict_path, csv_path);
      std::vector<std::string> ids;
      for (const auto& s : data.subjects) ids.push_back(s.id);
      std::optional<cohort::GroundTruth> truth;
      if (!truth_path.empty()) truth = cohort::ground_truth_from_json(read_json(truth_path));
      service::FitStageOptions o;
      o.offset_mm = offset_mm;
      o.limit = limit;
      o.fit.mode_fraction = mode_fraction;
      const auto fits = service::fit_subjects(model, ids, images_dir, truth ? &*truth : nullptr, o);
      write_out(out_dir, "fits.json", fits);
      std::cout << fits["detection"].dump(2) << "\n";
      return 0;
    }
    if (*cl) {
      const auto lines = service::centerlines_from_fits(fem::load_model(model_path), read_json(fits_path));
      fs::create_directories(out_dir);
      const auto path = (fs::path(out_dir) / "centerlines.csv").string();
      shape::write_centerlines(path, lines);
      std::cout << json{{"n", lines.size()}, {"path", path}}.dump(2) << "\n";
      return 0;
    }
    if (*clu) {
      json request = parse_inline(request_text);
      if (!algorithm.empty()) request["algorithm"] = algorithm;
      if (!params_text.empty()) request["params"] = parse_inline(params_text);
      const auto data = load_data(dict_path, csv_path);
      const auto lines = load_lines(lines_path);
      const auto r = mixed::run_clustering(request, data, lines.empty() ? nullptr : &lines);
      const auto report = mixed::cluster_report(r, json{{"cohort_digest", cohort::cohort_digest(data)}});
      write_out(out_dir, "report.json", report);
      std::cout << json{{"run_hash", r.run_hash}, {"n_clusters", r.n_clusters}, {"n_noise", r.n_noise},
                        {"cluster_sizes", r.cluster_sizes}}.dump(2)
                << "\n";
      return 0;
    }
    if (*st) {
      const auto data = load_data(dict_path, csv_path);
      const auto lines = load_lines(lines_path);
      std::map<std::string, mixed::ClusterRun> runs;
      for (const auto& p : report_paths) runs.emplace(fs::path(p).stem().string(), mixed::run_from_report(read_json(p)));
      stats::EstimatorContext ctx;
      ctx.find_run = [&](const std::string& id) -> const mixed::ClusterRun* {
        const auto it = runs.find(id);
        return it == runs.end() ? nullptr : &it->second;
      };
      ctx.centerlines = lines.empty() ? nullptr : &lines;
      auto out = stats::evaluate_estimator(estimator, parse_inline(params_text), data, ctx);
      out["output_digest"] = service::stats_output_digest(estimator, out);
      if (app.get_option("--out-dir")->count() > 0) write_out(out_dir, "stats.json", out);
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*rep) {
      const auto report = read_json(report_path);
      const auto data = load_data(dict_path, csv_path);
      const auto lines = load_lines(lines_path);
      const auto r = mixed::replay_report(report, data, lines.empty() ? nullptr : &lines);
      std::cout << json{{"verified", true}, {"run_hash", r.run_hash}, {"algorithm", report.at("algorithm")},
                        {"n_clusters", r.n_clusters}, {"cluster_sizes", r.cluster_sizes}}.dump(2)
                << "\n";
      return 0;
    }
    if (*rpl) {
      service::Engine engine;
      json ingest{{"dictionary", read_json(dict_path)}, {"csv", read_file(csv_path)}};
      if (!lines_path.empty()) ingest["centerlines_csv"] = read_file(lines_path);
      const auto c = engine.ingest(ingest);
      const auto out = engine.replay(read_json(archive_path), c.at("cohort_id").get<std::string>());
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*run) {
      const auto* cfg = app.get_option("--config");
      if (cfg->count() == 0) throw Error(ErrorCode::invalid_argument, "run needs --config");
      const auto config_path = cfg->as<std::string>();
      const auto config = read_json(config_path);
      const auto base = fs::absolute(config_path).parent_path().string();
      std::string dir = out_dir;
      if (app.get_option("--out-dir")->count() == 0 && config.contains("out_dir")) {
        dir = (fs::path(base) / config["out_dir"].get<std::string>()).string();
      }
      const auto r = service::run_batch(config, base, dir,
                                        seed_opt->count() > 0 ? std::optional<std::uint64_t>(seed) : std::nullopt);
      if (r.exit_code != 0) {
        std::cerr << "error: stage '" << r.failed_stage << "' failed: " << r.message << "\n";
        return r.exit_code;
      }
      json summary{{"status", "ok"}, {"report", (fs::path(dir) / "report.json").string()},
                   {"report_digest", r.report["report_digest"]}};
      if (r.report.contains("detection")) summary["detection"] = r.report["detection"];
      if (r.report.contains("runs")) summary["runs"] = r.report["runs"];
      std::cout << summary.dump(2) << "\n";
      return 0;
    }
    if (*srv) {
      std::string store = ":memory:";
      if (!data_dir.empty()) {
        fs::create_directories(data_dir);
        store = (fs::path(data_dir) / "cohortlab.db").string();
      }
      service::Engine engine(store);
      service::HttpServer server(engine);
      const auto [host, port] = split_listen(listen);
      const int bound = server.bind(host, port);
      if (bound < 0) throw Error(ErrorCode::io_error, "cannot bind " + listen);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on " << host << ":" << bound << std::endl;
      server.listen();
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: stage '" << stage_name << "' failed: [" << to_string(e.code()) << "] " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: stage '" << stage_name << "' failed: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
