#include "cohortlab/mixed/run.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <map>
#include <set>

#include "cohortlab/cohort/io.hpp"
#include "cohortlab/digest.hpp"
#include "cohortlab/error.hpp"
#include "cohortlab/shape/alignment.hpp"
#include "cohortlab/version.hpp"

namespace cohortlab::mixed {

using nlohmann::json;
using namespace cohortlab::cohort;

std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::mixed_dbscan: return "mixed_dbscan";
    case Algorithm::mixed_hierarchical: return "mixed_hierarchical";
    case Algorithm::shape_hierarchical: return "shape_hierarchical";
  }
  return "mixed_dbscan";
}

Algorithm parse_algorithm(std::string_view text) {
  for (auto a : {Algorithm::mixed_dbscan, Algorithm::mixed_hierarchical, Algorithm::shape_hierarchical}) {
    if (text == to_string(a)) return a;
  }
  throw Error(ErrorCode::invalid_argument, "unknown clustering algorithm '" + std::string(text) + "'");
}

std::optional<int> ClusterRun::label_of(std::string_view subject_id) const {
  const auto it = std::lower_bound(subject_ids.begin(), subject_ids.end(), subject_id);
  if (it == subject_ids.end() || *it != subject_id) return std::nullopt;
  return labels[static_cast<std::size_t>(it - subject_ids.begin())];
}

json cut_to_json(const shape::CutRule& cut) {
  json j = json::object();
  if (cut.count) j["count"] = *cut.count;
  if (cut.height) j["height"] = *cut.height;
  return j;
}

shape::CutRule cut_from_json(const json& j) {
  shape::CutRule cut;
  if (j.contains("count") && !j["count"].is_null()) cut.count = j["count"].get<std::size_t>();
  if (j.contains("height") && !j["height"].is_null()) cut.height = j["height"].get<double>();
  if (!cut.count && !cut.height) throw Error(ErrorCode::invalid_argument, "cut needs 'count' or 'height'");
  if (cut.count && cut.height) throw Error(ErrorCode::invalid_argument, "cut takes either 'count' or 'height'");
  return cut;
}

namespace {

std::vector<SubjectRecord> sorted_records(const Cohort& cohort) {
  std::vector<SubjectRecord> recs = cohort.subjects;
  std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < recs.size(); ++i) {
    if (recs[i].id == recs[i - 1].id) throw Error(ErrorCode::invalid_argument, "duplicate subject id " + recs[i].id);
  }
  return recs;
}

void finalize(ClusterRun& run) {
  run.n_used = run.subject_ids.size();
  run.n_input = run.input_ids.size();
  run.n_excluded_missing = run.excluded_ids.size();
  int max_label = -1;
  for (int l : run.labels) max_label = std::max(max_label, l);
  run.n_clusters = static_cast<std::size_t>(max_label + 1);
  run.cluster_sizes.assign(run.n_clusters, 0);
  run.n_noise = 0;
  for (int l : run.labels) {
    if (l == kNoise) {
      ++run.n_noise;
    } else {
      ++run.cluster_sizes[static_cast<std::size_t>(l)];
    }
  }
  run.run_hash = json_digest(json{{"algorithm", to_string(run.algorithm)},
                                  {"params", run.params},
                                  {"input_digest", run.input_digest},
                                  {"subject_ids", run.subject_ids},
                                  {"labels", run.labels},
                                  {"details", run.details}});
}

json merges_to_json(const std::vector<shape::Merge>& merges) {
  json a = json::array();
  for (const auto& m : merges) a.push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}, {"size", m.size}});
  return a;
}

struct Prepared {
  std::vector<SubjectRecord> used;
  ClusterRun run;
};

Prepared prepare_mixed(const Cohort& cohort, const MixedDistanceSpec& spec, const MixedMetric& metric,
                       const std::vector<SubjectRecord>& recs) {
  Prepared p;
  for (const auto& r : recs) {
    p.run.input_ids.push_back(r.id);
    if (metric.usable(r)) {
      p.used.push_back(r);
      p.run.subject_ids.push_back(r.id);
      bool any_missing = false;
      for (const auto& a : spec.attributes) any_missing = any_missing || is_missing(r.value(a));
      p.run.n_with_missing += any_missing;
    } else {
      p.run.excluded_ids.push_back(r.id);
    }
  }
  if (p.used.empty()) throw Error(ErrorCode::empty_input, "no record has a usable value for the distance attributes");
  p.run.input_digest = records_digest(cohort, spec.attributes);
  json norms = json::object();
  for (std::size_t k = 0; k < spec.attributes.size(); ++k) {
    if (cohort.dictionary.at(spec.attributes[k]).kind == AttributeKind::scalar) {
      norms[spec.attributes[k]] = metric.normalizers()[k];
    }
  }
  p.run.details["scalar_normalizers"] = norms;
  return p;
}

}  // namespace

std::string records_digest(const Cohort& cohort, const std::vector<std::string>& attributes) {
  json defs = json::array();
  for (const auto& a : attributes) {
    const auto& def = cohort.dictionary.at(a);
    defs.push_back({{"name", def.name}, {"kind", to_string(def.kind)}, {"categories", def.categories}});
  }
  json rows = json::array();
  for (const auto& r : sorted_records(cohort)) {
    json vals = json::array();
    for (const auto& a : attributes) vals.push_back(value_to_json(cohort.dictionary.at(a), r.value(a)));
    rows.push_back({r.id, vals});
  }
  return json_digest(json{{"attributes", defs}, {"rows", rows}});
}

std::string centerlines_digest(const std::vector<shape::Centerline>& lines) {
  std::vector<const shape::Centerline*> sorted;
  for (const auto& c : lines) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->subject_id < b->subject_id; });
  json rows = json::array();
  for (const auto* c : sorted) rows.push_back({{"subject_id", c->subject_id}, {"points", shape::centerline_to_json(*c)["points"]}});
  return json_digest(rows);
}

ClusterRun run_dbscan(const Cohort& cohort, const MixedDistanceSpec& spec, const DbscanParams& params) {
  if (cohort.subjects.empty()) throw Error(ErrorCode::empty_selection, "clustering input is empty");
  params.validate();
  const auto recs = sorted_records(cohort);
  const MixedMetric metric(cohort.dictionary, spec, recs);
  auto p = prepare_mixed(cohort, spec, metric, recs);
  const auto res = dbscan(distance_matrix(metric, p.used), params);
  p.run.algorithm = Algorithm::mixed_dbscan;
  p.run.params = {{"distance", spec_to_json(spec)}, {"eps", params.eps}, {"min_points", params.min_points},
                  {"border_assignment", "lowest_index_core_neighbour"}};
  p.run.labels = res.labels;
  json core = json::array();
  for (std::size_t i = 0; i < res.core.size(); ++i) {
    if (res.core[i]) core.push_back(p.run.subject_ids[i]);
  }
  p.run.details["core_ids"] = core;
  finalize(p.run);
  return p.run;
}

ClusterRun run_mixed_hierarchical(const Cohort& cohort, const MixedDistanceSpec& spec, const HierarchicalParams& params) {
  if (cohort.subjects.empty()) throw Error(ErrorCode::empty_selection, "clustering input is empty");
  const auto recs = sorted_records(cohort);
  const MixedMetric metric(cohort.dictionary, spec, recs);
  auto p = prepare_mixed(cohort, spec, metric, recs);
  Eigen::MatrixXd d = distance_matrix(metric, p.used);
  d = d.unaryExpr([](double v) { return std::isfinite(v) ? v : 1.0; });
  const auto c = shape::agglomerative_cluster(d, params.linkage, params.cut);
  p.run.algorithm = Algorithm::mixed_hierarchical;
  p.run.params = {{"distance", spec_to_json(spec)},
                  {"linkage", shape::to_string(params.linkage)},
                  {"cut", cut_to_json(params.cut)},
                  {"undefined_distance", 1.0}};
  p.run.labels = c.labels;
  json reps = json::array();
  for (std::size_t r : c.representatives) reps.push_back(p.run.subject_ids[r]);
  p.run.details["merges"] = merges_to_json(c.merges);
  p.run.details["representative_ids"] = reps;
  finalize(p.run);
  return p.run;
}

ClusterRun run_shape_hierarchical(const std::vector<shape::Centerline>& input, const ShapeRunParams& params) {
  if (input.empty()) throw Error(ErrorCode::empty_selection, "no centerlines for the selection");
  if (params.alignment_iterations < 0) throw Error(ErrorCode::invalid_argument, "alignment_iterations must be >= 0");
  std::vector<shape::Centerline> lines = input;
  std::sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
  for (std::size_t i = 0; i < lines.size(); ++i) {
    shape::validate(lines[i], 0);
    if (i > 0 && lines[i].subject_id == lines[i - 1].subject_id) {
      throw Error(ErrorCode::invalid_argument, "duplicate centerline for " + lines[i].subject_id);
    }
  }
  ClusterRun run;
  run.algorithm = Algorithm::shape_hierarchical;
  run.params = {{"linkage", shape::to_string(params.linkage)},
                {"cut", cut_to_json(params.cut)},
                {"alignment", "iterated_mean_shape"},
                {"alignment_iterations", params.alignment_iterations},
                {"distance", "mean_point_distance_mm"}};
  run.input_digest = centerlines_digest(lines);
  for (const auto& c : lines) {
    run.input_ids.push_back(c.subject_id);
    run.subject_ids.push_back(c.subject_id);
  }
  const auto aligned = shape::align_to_mean(lines, params.alignment_iterations);
  const auto c = shape::agglomerative_cluster(shape::distance_matrix(aligned.aligned), params.linkage, params.cut);
  run.labels = c.labels;
  json reps = json::array();
  for (std::size_t r : c.representatives) reps.push_back(run.subject_ids[r]);
  run.details["merges"] = merges_to_json(c.merges);
  run.details["representative_ids"] = reps;
  finalize(run);
  return run;
}

ClusterRun run_clustering(const json& request, const Cohort& cohort, const std::vector<shape::Centerline>* lines) {
  try {
    const auto algorithm = parse_algorithm(request.at("algorithm").get<std::string>());
    const json params = request.value("params", json::object());
    switch (algorithm) {
      case Algorithm::mixed_dbscan: {
        DbscanParams p;
        p.eps = params.at("eps").get<double>();
        p.min_points = params.at("min_points").get<std::size_t>();
        return run_dbscan(cohort, spec_from_json(params.at("distance")), p);
      }
      case Algorithm::mixed_hierarchical: {
        HierarchicalParams p;
        p.linkage = shape::parse_linkage(params.value("linkage", std::string("average")));
        p.cut = cut_from_json(params.at("cut"));
        return run_mixed_hierarchical(cohort, spec_from_json(params.at("distance")), p);
      }
      case Algorithm::shape_hierarchical: {
        if (!lines) throw Error(ErrorCode::invalid_argument, "shape clustering needs centerlines");
        ShapeRunParams p;
        p.linkage = shape::parse_linkage(params.value("linkage", std::string("average")));
        if (params.contains("cut")) p.cut = cut_from_json(params["cut"]);
        p.alignment_iterations = params.value("alignment_iterations", 2);
        std::set<std::string, std::less<>> ids;
        for (const auto& s : cohort.subjects) ids.insert(s.id);
        std::vector<shape::Centerline> selected;
        for (const auto& c : *lines) {
          if (ids.count(c.subject_id)) selected.push_back(c);
        }
        return run_shape_hierarchical(selected, p);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("clustering request: ") + e.what());
  }
  throw Error(ErrorCode::invalid_argument, "unhandled algorithm");
}

namespace {

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

json cluster_report(const ClusterRun& run, const json& cohort_ref) {
  json labels = json::array();
  for (std::size_t i = 0; i < run.subject_ids.size(); ++i) {
    labels.push_back({{"subject_id", run.subject_ids[i]}, {"label", run.labels[i]}});
  }
  json missing = {{"n_excluded_missing", run.n_excluded_missing}, {"n_with_missing", run.n_with_missing}};
  if (run.params.contains("distance") && run.params["distance"].is_object()) {
    const auto policy = run.params["distance"].value("missing_policy", std::string());
    missing["policy"] = policy;
    missing["description"] =
        policy == "impute_max"
            ? "every record is used; an attribute missing on either side contributes distance 1"
            : "records without any weighted value are excluded; per pair, weights are renormalised over attributes "
              "present in both records; pairs with no common attribute are never neighbours";
  } else {
    missing["policy"] = "none";
    missing["description"] = "centerlines have no missing values";
  }
  return json{{"report_type", "cluster_run"},
              {"engine", {{"name", kEngineName}, {"version", kEngineVersion}}},
              {"algorithm", to_string(run.algorithm)},
              {"params", run.params},
              {"input",
               {{"cohort", cohort_ref},
                {"input_digest", run.input_digest},
                {"input_ids", run.input_ids},
                {"n_input", run.n_input},
                {"n_used", run.n_used},
                {"n_excluded_missing", run.n_excluded_missing},
                {"excluded_ids", run.excluded_ids}}},
              {"missing_handling", missing},
              {"result",
               {{"n_clusters", run.n_clusters},
                {"n_noise", run.n_noise},
                {"cluster_sizes", run.cluster_sizes},
                {"labels", labels},
                {"details", run.details}}},
              {"run_hash", run.run_hash},
              {"timestamp", utc_timestamp()}};
}

ClusterRun run_from_report(const json& report) {
  ClusterRun run;
  try {
    run.algorithm = parse_algorithm(report.at("algorithm").get<std::string>());
    run.params = report.at("params");
    const auto& in = report.at("input");
    run.input_ids = in.at("input_ids").get<std::vector<std::string>>();
    run.excluded_ids = in.at("excluded_ids").get<std::vector<std::string>>();
    run.input_digest = in.at("input_digest").get<std::string>();
    run.n_with_missing = report.at("missing_handling").at("n_with_missing").get<std::size_t>();
    const auto& res = report.at("result");
    for (const auto& l : res.at("labels")) {
      run.subject_ids.push_back(l.at("subject_id").get<std::string>());
      run.labels.push_back(l.at("label").get<int>());
    }
    run.details = res.at("details");
    finalize(run);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("report: ") + e.what());
  }
  if (run.run_hash != report.value("run_hash", std::string())) {
    throw Error(ErrorCode::digest_mismatch, "report content does not match its run hash");
  }
  return run;
}

ClusterRun replay_report(const json& report, const Cohort& cohort, const std::vector<shape::Centerline>* lines) {
  std::vector<std::string> ids;
  std::string expected_digest, expected_hash;
  json request;
  try {
    ids = report.at("input").at("input_ids").get<std::vector<std::string>>();
    expected_digest = report.at("input").at("input_digest").get<std::string>();
    expected_hash = report.at("run_hash").get<std::string>();
    request = {{"algorithm", report.at("algorithm")}, {"params", report.at("params")}};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("report: ") + e.what());
  }
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) index[cohort.subjects[i].id] = i;
  std::vector<std::size_t> rows;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) {
      throw Error(ErrorCode::digest_mismatch, "replay data lacks subject '" + id + "' listed in the report");
    }
    rows.push_back(it->second);
  }
  Cohort input;
  input.dictionary = cohort.dictionary;
  input.wave = cohort.wave;
  for (std::size_t r : rows) input.subjects.push_back(cohort.subjects[r]);
  const auto run = run_clustering(request, input, lines);
  if (run.input_digest != expected_digest) {
    throw Error(ErrorCode::digest_mismatch, std::string(run.algorithm == Algorithm::shape_hierarchical ? "centerlines"
                                                                                                       : "cohort records") +
                                                " digest differs: report " + expected_digest + ", data " + run.input_digest);
  }
  if (run.run_hash != expected_hash) {
    throw Error(ErrorCode::digest_mismatch, "run hash differs: report " + expected_hash + ", replay " + run.run_hash);
  }
  return run;
}

json five_number_to_json(const FiveNumber& f) {
  return json{{"min", f.min}, {"q1", f.q1}, {"median", f.median}, {"q3", f.q3}, {"max", f.max}};
}

AttributeProfile cluster_attribute_profile(const ClusterRun& run, const Cohort& cohort, const std::string& attribute,
                                           std::size_t histogram_bins) {
  const auto& def = cohort.dictionary.at(attribute);
  AttributeProfile out;
  out.attribute = attribute;
  out.kind = def.kind;
  std::vector<int> order;
  for (std::size_t k = 0; k < run.n_clusters; ++k) order.push_back(static_cast<int>(k));
  if (run.n_noise > 0) order.push_back(kNoise);

  std::map<int, std::vector<const SubjectRecord*>> members;
  for (std::size_t i = 0; i < run.subject_ids.size(); ++i) {
    const auto* rec = cohort.find(run.subject_ids[i]);
    if (!rec) throw Error(ErrorCode::not_found, "subject '" + run.subject_ids[i] + "' is not in the cohort");
    members[run.labels[i]].push_back(rec);
  }
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& [label, recs] : members) {
    for (const auto* r : recs) {
      if (const auto v = numeric(r->value(attribute))) {
        lo = any ? std::min(lo, *v) : *v;
        hi = any ? std::max(hi, *v) : *v;
        any = true;
      }
    }
  }
  for (int label : order) {
    const auto& recs = members[label];
    if (recs.empty()) throw Error(ErrorCode::empty_input, "cluster " + std::to_string(label) + " has no members");
    ClusterProfile cp;
    cp.label = label;
    std::vector<double> xs;
    std::vector<std::size_t> freq(def.categories.size(), 0);
    for (const auto* r : recs) {
      const auto v = numeric(r->value(attribute));
      if (!v) {
        ++cp.n_missing;
        continue;
      }
      xs.push_back(*v);
      if (def.is_categorical()) ++freq[static_cast<std::size_t>(*v)];
    }
    cp.n = recs.size();
    if (def.is_categorical()) {
      for (std::size_t c = 0; c < def.categories.size(); ++c) cp.frequencies.push_back({def.categories[c], freq[c]});
    }
    if (def.kind != AttributeKind::nominal && !xs.empty()) cp.five_number = five_number_summary(xs);
    if (def.kind == AttributeKind::scalar && any) {
      HistogramBins h;
      const std::size_t nb = hi > lo ? std::max<std::size_t>(histogram_bins, 1) : 1;
      for (std::size_t b = 0; b <= nb; ++b) h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(nb));
      h.counts.assign(nb, 0);
      for (double x : xs) {
        auto b = hi > lo ? static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(nb)) : 0;
        ++h.counts[std::min(b, nb - 1)];
      }
      cp.histogram = h;
    }
    out.clusters.push_back(std::move(cp));
  }
  return out;
}

json profile_to_json(const AttributeProfile& p) {
  json clusters = json::array();
  for (const auto& c : p.clusters) {
    json j{{"label", c.label}, {"noise", c.label == kNoise}, {"n", c.n}, {"n_missing", c.n_missing}};
    j["five_number"] = c.five_number ? five_number_to_json(*c.five_number) : json(nullptr);
    if (c.histogram) {
      j["histogram"] = {{"edges", c.histogram->edges}, {"counts", c.histogram->counts}};
    } else {
      j["histogram"] = nullptr;
    }
    json freq = json::array();
    for (const auto& f : c.frequencies) freq.push_back({{"category", f.category}, {"count", f.count}});
    j["frequencies"] = freq;
    clusters.push_back(j);
  }
  return json{{"attribute", p.attribute}, {"kind", cohort::to_string(p.kind)}, {"clusters", clusters}};
}

}  // namespace cohortlab::mixed
