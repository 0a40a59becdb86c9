#include "cohortlab/service/engine.hpp"

#include <algorithm>
#include <cstdio>

#include "cohortlab/cohort/summary.hpp"
#include "cohortlab/cohort/synthetic.hpp"
#include "cohortlab/digest.hpp"
#include "cohortlab/error.hpp"
#include "cohortlab/service/views.hpp"
#include "cohortlab/stats/registry.hpp"
#include "cohortlab/version.hpp"

namespace cohortlab::service {

using nlohmann::json;
using namespace cohortlab::cohort;

struct Engine::Session {
  std::string id;
  std::string cohort_id;
  std::string created;
  std::shared_ptr<const LoadedCohort> cohort;
  std::map<std::string, json, std::less<>> selections;  // name -> canonical predicates
  std::string current = "all";
  std::vector<std::string> run_ids;
  ProvenanceLog log;
  std::mutex mutex;
};

std::string selection_digest(const std::string& name, const std::vector<std::string>& ids) {
  return json_digest(json{{"name", name}, {"count", ids.size()}, {"ids", ids}});
}

std::string stats_output_digest(const std::string& estimator, const json& evaluated) {
  return json_digest(strip_volatile(json{{"estimator", estimator},
                                         {"result", evaluated.at("result")},
                                         {"n_used", evaluated.at("n_used")},
                                         {"n_missing", evaluated.at("n_missing")}}));
}

namespace {

std::string session_name(std::uint64_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%06llu", static_cast<unsigned long long>(k));
  return buf;
}

struct Selected {
  std::string name;
  std::vector<std::size_t> indices;
  std::vector<std::string> ids;
  std::string digest;
};

// Replaces every string equal to a key of `map` with its value.
void rewrite_ids(json& j, const std::map<std::string, std::string>& map) {
  if (j.is_string()) {
    const auto it = map.find(j.get<std::string>());
    if (it != map.end()) j = it->second;
  } else if (j.is_structured()) {
    for (auto& v : j) rewrite_ids(v, map);
  }
}

LoadedCohort load_text(const std::string& name, const json& dictionary, const std::string& csv,
                       const std::string& centerlines_csv) {
  LoadedCohort c;
  c.name = name;
  const auto dict = parse_dictionary(dictionary);
  auto ingested = parse_cohort(csv, dict);
  c.cohort = std::move(ingested.cohort);
  c.ingest_stats = ingest_stats_to_json(ingested.stats);
  if (!centerlines_csv.empty()) {
    c.centerlines = shape::parse_centerlines(centerlines_csv);
    std::sort(c.centerlines.begin(), c.centerlines.end(),
              [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
  }
  c.digest = cohort_digest(c.cohort);
  c.file_digests[kDictionaryFile] = sha256_hex(dictionary_to_json(c.cohort.dictionary).dump());
  c.file_digests[kCohortFile] = sha256_hex(format_cohort(c.cohort));
  std::string id_basis = c.digest;
  if (!c.centerlines.empty()) {
    c.file_digests[kCenterlinesFile] = sha256_hex(shape::format_centerlines(c.centerlines));
    id_basis += "\n" + c.file_digests[kCenterlinesFile];
  }
  c.id = "c-" + sha256_hex(id_basis).substr(0, 12);
  return c;
}

json parse_json_field(const json& j) { return j.is_string() ? json::parse(j.get<std::string>()) : j; }

}  // namespace

Engine::Engine(const std::string& store_path) : store_(std::make_unique<Store>(store_path)) { rehydrate(); }

Engine::~Engine() = default;

std::shared_ptr<const LoadedCohort> Engine::add_cohort(LoadedCohort c, bool persist) {
  auto ptr = std::make_shared<const LoadedCohort>(std::move(c));
  {
    std::unique_lock lock(mutex_);
    const auto it = cohorts_.find(ptr->id);
    if (it != cohorts_.end()) return it->second;
    cohorts_[ptr->id] = ptr;
  }
  if (persist) {
    StoredCohort s{ptr->id,
                   ptr->name,
                   dictionary_to_json(ptr->cohort.dictionary).dump(),
                   format_cohort(ptr->cohort),
                   ptr->digest,
                   ptr->ingest_stats.dump(),
                   ptr->centerlines.empty() ? std::string() : shape::format_centerlines(ptr->centerlines)};
    std::lock_guard lock(store_mutex_);
    store_->put_cohort(s);
  }
  return ptr;
}

void Engine::rehydrate() {
  for (const auto& sc : store_->cohorts()) {
    auto c = load_text(sc.name, json::parse(sc.dictionary_json), sc.csv, sc.centerlines_csv);
    c.ingest_stats = json::parse(sc.ingest_stats_json);
    c.id = sc.id;
    add_cohort(std::move(c), false);
  }
  std::map<std::string, std::shared_ptr<Session>> by_id;
  for (const auto& ss : store_->sessions()) {
    auto s = std::make_shared<Session>();
    s->id = ss.id;
    s->cohort_id = ss.cohort_id;
    s->created = ss.created;
    s->cohort = cohorts_.at(ss.cohort_id);
    s->selections["all"] = json::array();
    by_id[s->id] = s;
    if (ss.id.size() > 1) next_session_ = std::max<std::uint64_t>(next_session_, std::stoull(ss.id.substr(1)) + 1);
  }
  for (const auto& sel : store_->selections()) by_id.at(sel.session_id)->selections[sel.name] = json::parse(sel.predicates_json);
  for (const auto& p : store_->provenance()) {
    auto& s = *by_id.at(p.session_id);
    auto e = entry_from_json(json::parse(p.entry_json));
    if (e.operation == "apply_selection") s.current = e.params.at("name").get<std::string>();
    s.log.restore(std::move(e));
  }
  for (const auto& r : store_->runs()) {
    const auto report = json::parse(r.report_json);
    runs_[r.id] = std::make_shared<const mixed::ClusterRun>(mixed::run_from_report(report));
    reports_[r.id] = report;
    by_id.at(r.session_id)->run_ids.push_back(r.id);
  }
  for (auto& [id, s] : by_id) {
    std::sort(s->run_ids.begin(), s->run_ids.end(), [](const std::string& a, const std::string& b) {
      return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    sessions_[id] = s;
  }
}

void Engine::persist_entry(const std::string& session_id, const ProvenanceEntry& e) {
  std::lock_guard lock(store_mutex_);
  store_->append_provenance({session_id, e.sequence, entry_to_json(e).dump()});
}

json Engine::ingest(const json& request) {
  const auto name = request.value("name", std::string());
  LoadedCohort c;
  if (request.contains("synthetic")) {
    const auto& syn = request["synthetic"];
    auto spec = spec_from_json(syn.value("spec", json::object()));
    spec.render_images = false;
    const auto data = generate_synthetic_cohort(spec, syn.value("seed", std::uint64_t{7}));
    std::vector<shape::Centerline> lines;
    for (const auto& t : data.truth.subjects) lines.push_back({t.id, t.centerline});
    c = load_text(name, dictionary_to_json(data.cohort.dictionary), format_cohort(data.cohort),
                  shape::format_centerlines(lines));
  } else {
    if (!request.contains("dictionary") || !request.contains("csv")) {
      throw Error(ErrorCode::invalid_argument, "ingest needs 'dictionary' and 'csv', or 'synthetic'");
    }
    c = load_text(name, parse_json_field(request["dictionary"]), request["csv"].get<std::string>(),
                  request.value("centerlines_csv", std::string()));
  }
  const auto ptr = add_cohort(std::move(c), true);
  json files = json::object();
  for (const auto& [f, d] : ptr->file_digests) files[f] = d;
  return json{{"cohort_id", ptr->id},
              {"name", ptr->name},
              {"digest", ptr->digest},
              {"n_subjects", ptr->cohort.subjects.size()},
              {"n_attributes", ptr->cohort.dictionary.size()},
              {"n_centerlines", ptr->centerlines.size()},
              {"ingest_stats", ptr->ingest_stats},
              {"file_digests", files}};
}

std::shared_ptr<const LoadedCohort> Engine::cohort(const std::string& cohort_id) const {
  std::shared_lock lock(mutex_);
  const auto it = cohorts_.find(cohort_id);
  if (it == cohorts_.end()) throw Error(ErrorCode::not_found, "unknown cohort '" + cohort_id + "'");
  return it->second;
}

json Engine::attributes(const std::string& cohort_id) const {
  const auto c = cohort(cohort_id);
  json summaries = json::array();
  for (const auto& a : c->cohort.dictionary.attributes()) {
    summaries.push_back(summary_to_json(attribute_summary(c->cohort, a.name)));
  }
  return json{{"cohort_id", c->id},
              {"n_subjects", c->cohort.subjects.size()},
              {"dictionary", dictionary_to_json(c->cohort.dictionary)},
              {"summaries", summaries},
              {"has_centerlines", !c->centerlines.empty()}};
}

std::shared_ptr<Engine::Session> Engine::session(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::not_found, "unknown session '" + id + "'");
  return it->second;
}

std::vector<std::string> Engine::session_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

json Engine::create_session(const std::string& cohort_id) { return do_create_session(cohort_id); }

json Engine::do_create_session(const std::string& cohort_id) {
  const auto c = cohort(cohort_id);
  auto s = std::make_shared<Session>();
  s->cohort_id = c->id;
  s->cohort = c;
  s->created = utc_now();
  s->selections["all"] = json::array();
  {
    std::unique_lock lock(mutex_);
    s->id = session_name(next_session_++);
    sessions_[s->id] = s;
  }
  {
    std::lock_guard lock(store_mutex_);
    store_->put_session({s->id, s->cohort_id, s->created});
  }
  std::lock_guard lock(s->mutex);
  const auto& e = s->log.append("create_session", json{{"cohort_id", c->id}}, json{{"cohort", c->digest}},
                                json_digest(json{{"cohort", c->digest}, {"n_subjects", c->cohort.subjects.size()}}));
  persist_entry(s->id, e);
  return json{{"session_id", s->id}, {"cohort_id", c->id}, {"created", s->created}, {"sequence", e.sequence},
              {"output_digest", e.output_digest}};
}

namespace {

Selected resolve(const LoadedCohort& c, const std::map<std::string, json, std::less<>>& selections,
                 const std::string& name) {
  const auto it = selections.find(name);
  if (it == selections.end()) throw Error(ErrorCode::not_found, "unknown selection '" + name + "'");
  Selected s;
  s.name = name;
  s.indices = select(c.cohort, predicates_from_json(it->second, c.cohort.dictionary));
  for (auto i : s.indices) s.ids.push_back(c.cohort.subjects[i].id);
  s.digest = selection_digest(name, s.ids);
  return s;
}

}  // namespace

json Engine::apply_selection(const std::string& session_id, const std::string& name, const json& predicates) {
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  return do_selection(*s, name, predicates, true);
}

json Engine::do_selection(Session& s, const std::string& name, const json& predicates, bool log) {
  if (name.empty()) throw Error(ErrorCode::invalid_argument, "selection name must not be empty");
  const auto parsed = predicates_from_json(predicates.is_null() ? json::array() : predicates, s.cohort->cohort.dictionary);
  const auto canonical = predicates_to_json(parsed);
  s.selections[name] = canonical;
  s.current = name;
  const auto sel = resolve(*s.cohort, s.selections, name);
  {
    std::lock_guard lock(store_mutex_);
    store_->put_selection({s.id, name, canonical.dump()});
  }
  json out{{"session_id", s.id}, {"name", name}, {"count", sel.ids.size()}, {"subject_ids", sel.ids},
           {"output_digest", sel.digest}};
  if (log) {
    const auto& e = s.log.append("apply_selection", json{{"name", name}, {"predicates", canonical}},
                                 json{{"cohort", s.cohort->digest}}, sel.digest);
    persist_entry(s.id, e);
    out["sequence"] = e.sequence;
  }
  return out;
}

json Engine::run_clustering(const std::string& session_id, const json& request) {
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  return do_run(*s, request, true);
}

json Engine::do_run(Session& s, const json& request, bool log) {
  const auto sel = resolve(*s.cohort, s.selections, request.value("selection", s.current));
  if (sel.indices.empty()) throw Error(ErrorCode::empty_selection, "selection '" + sel.name + "' is empty");
  const auto sub = subset(s.cohort->cohort, sel.indices);
  const json req{{"algorithm", request.at("algorithm")}, {"params", request.value("params", json::object())}};
  const auto* lines = s.cohort->centerlines.empty() ? nullptr : &s.cohort->centerlines;
  auto run = std::make_shared<const mixed::ClusterRun>(mixed::run_clustering(req, sub, lines));
  const auto run_id = s.id + "-r" + std::to_string(s.run_ids.size() + 1);
  const auto report = mixed::cluster_report(
      *run, json{{"cohort_id", s.cohort->id}, {"digest", s.cohort->digest}, {"session_id", s.id},
                 {"selection", sel.name}, {"run_id", run_id}});
  {
    std::unique_lock lock(mutex_);
    runs_[run_id] = run;
    reports_[run_id] = report;
  }
  s.run_ids.push_back(run_id);
  {
    std::lock_guard lock(store_mutex_);
    store_->put_run({run_id, s.id, report.dump()});
  }
  json out{{"session_id", s.id},
           {"run_id", run_id},
           {"run_hash", run->run_hash},
           {"algorithm", req["algorithm"]},
           {"selection", sel.name},
           {"n_used", run->n_used},
           {"n_excluded_missing", run->n_excluded_missing},
           {"n_clusters", run->n_clusters},
           {"n_noise", run->n_noise},
           {"cluster_sizes", run->cluster_sizes},
           {"output_digest", run->run_hash}};
  if (log) {
    const auto& e = s.log.append("run_clustering",
                                 json{{"algorithm", req["algorithm"]}, {"params", req["params"]}, {"selection", sel.name}},
                                 json{{"cohort", s.cohort->digest}, {"selection", sel.digest}, {"input", run->input_digest}},
                                 run->run_hash);
    persist_entry(s.id, e);
    out["sequence"] = e.sequence;
  }
  return out;
}

json Engine::run_report(const std::string& run_id) const {
  std::shared_lock lock(mutex_);
  const auto it = reports_.find(run_id);
  if (it == reports_.end()) throw Error(ErrorCode::not_found, "unknown run '" + run_id + "'");
  return it->second;
}

json Engine::query_stats(const std::string& session_id, const std::string& estimator, const json& params,
                         const std::string& selection) {
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  return do_stats(*s, estimator, params, selection, true);
}

json Engine::do_stats(Session& s, const std::string& estimator, const json& params, const std::string& selection,
                      bool log) {
  const auto sel = resolve(*s.cohort, s.selections, selection.empty() ? s.current : selection);
  const auto sub = subset(s.cohort->cohort, sel.indices);
  stats::EstimatorContext ctx;
  ctx.find_run = [this](const std::string& id) -> const mixed::ClusterRun* {
    std::shared_lock lock(mutex_);
    const auto it = runs_.find(id);
    return it == runs_.end() ? nullptr : it->second.get();
  };
  ctx.centerlines = s.cohort->centerlines.empty() ? nullptr : &s.cohort->centerlines;
  auto result = stats::evaluate_estimator(estimator, params, sub, ctx);
  const auto digest = stats_output_digest(estimator, result);
  result["session_id"] = s.id;
  result["selection"] = sel.name;
  result["n_selected"] = sel.indices.size();
  result["output_digest"] = digest;
  if (log) {
    const auto& e = s.log.append("query_stats", json{{"estimator", estimator}, {"params", params}, {"selection", sel.name}},
                                 json{{"cohort", s.cohort->digest}, {"selection", sel.digest}}, digest);
    persist_entry(s.id, e);
    result["sequence"] = e.sequence;
  }
  return result;
}

json Engine::view(const std::string& session_id, const std::string& view_name, const json& params,
                  const std::string& selection) {
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  const auto sel = resolve(*s->cohort, s->selections, selection.empty() ? s->current : selection);
  std::vector<bool> flags(s->cohort->cohort.subjects.size(), false);
  for (auto i : sel.indices) flags[i] = true;
  stats::EstimatorContext ctx;
  ctx.find_run = [this](const std::string& id) -> const mixed::ClusterRun* {
    std::shared_lock lock(mutex_);
    const auto it = runs_.find(id);
    return it == runs_.end() ? nullptr : it->second.get();
  };
  ctx.centerlines = s->cohort->centerlines.empty() ? nullptr : &s->cohort->centerlines;
  auto out = view_model(view_name, params, s->cohort->cohort, flags, ctx);
  out["session_id"] = s->id;
  out["selection"] = sel.name;
  out["n_selected"] = sel.indices.size();
  return out;
}

json Engine::provenance(const std::string& session_id) const {
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  json entries = json::array();
  for (const auto& e : s->log.entries()) entries.push_back(entry_to_json(e));
  return json{{"session_id", s->id}, {"entries", entries}};
}

json Engine::export_session(const std::string& session_id) const {
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  json files = json::object();
  for (const auto& [f, d] : s->cohort->file_digests) files[f] = d;
  json entries = json::array();
  for (const auto& e : s->log.entries()) entries.push_back(entry_to_json(e));
  json reports = json::array();
  for (const auto& id : s->run_ids) reports.push_back(json{{"run_id", id}, {"report", run_report(id)}});
  return json{{"format", kArchiveFormat},
              {"format_version", 1},
              {"engine", {{"name", kEngineName}, {"version", kEngineVersion}}},
              {"session", {{"id", s->id}, {"cohort_id", s->cohort_id}, {"created", s->created}}},
              {"data", {{"cohort_digest", s->cohort->digest}, {"files", files}}},
              {"provenance", entries},
              {"reports", reports},
              {"timestamp", utc_now()}};
}

json Engine::replay(const json& archive, const std::string& cohort_id) {
  if (archive.value("format", std::string()) != kArchiveFormat) {
    throw Error(ErrorCode::parse_error, "not a session archive");
  }
  const auto old_session = archive.at("session").at("id").get<std::string>();
  const auto target = cohort(cohort_id.empty() ? archive["session"].at("cohort_id").get<std::string>() : cohort_id);

  for (auto it = archive.at("data").at("files").begin(); it != archive["data"]["files"].end(); ++it) {
    const auto found = target->file_digests.find(it.key());
    const std::string actual = found == target->file_digests.end() ? "absent" : found->second;
    if (actual != it.value().get<std::string>()) {
      throw Error(ErrorCode::digest_mismatch, "data file '" + it.key() + "': expected " +
                                                  it.value().get<std::string>() + ", got " + actual);
    }
  }
  const auto& entries = archive.at("provenance");
  if (entries.empty() || entries[0].at("operation") != "create_session") {
    throw Error(ErrorCode::parse_error, "archive provenance must start with create_session");
  }

  json log = json::array();
  auto check = [&](const ProvenanceEntry& expected, const std::string& actual) {
    const bool match = expected.output_digest == actual;
    log.push_back({{"sequence", expected.sequence}, {"operation", expected.operation},
                   {"expected", expected.output_digest}, {"actual", actual}, {"match", match}});
    if (!match) {
      throw Error(ErrorCode::digest_mismatch, "provenance entry " + std::to_string(expected.sequence) + " (" +
                                                  expected.operation + "): expected " + expected.output_digest +
                                                  ", got " + actual);
    }
  };

  const auto created = do_create_session(target->id);
  const auto new_id = created.at("session_id").get<std::string>();
  check(entry_from_json(entries[0]), created.at("output_digest").get<std::string>());
  auto s = session(new_id);
  std::lock_guard lock(s->mutex);
  std::map<std::string, std::string> run_map;
  std::size_t n_runs = 0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const auto e = entry_from_json(entries[i]);
    json params = e.params;
    rewrite_ids(params, run_map);
    json out;
    if (e.operation == "apply_selection") {
      out = do_selection(*s, params.at("name").get<std::string>(), params.at("predicates"), true);
    } else if (e.operation == "run_clustering") {
      out = do_run(*s, params, true);
      run_map[old_session + "-r" + std::to_string(++n_runs)] = out.at("run_id").get<std::string>();
    } else if (e.operation == "query_stats") {
      out = do_stats(*s, params.at("estimator").get<std::string>(), params.value("params", json::object()),
                     params.value("selection", std::string()), true);
    } else {
      throw Error(ErrorCode::parse_error, "unknown provenance operation '" + e.operation + "'");
    }
    check(e, out.at("output_digest").get<std::string>());
  }
  for (const auto& r : archive.value("reports", json::array())) {
    const auto old_id = r.at("run_id").get<std::string>();
    const auto it = run_map.find(old_id);
    if (it == run_map.end()) throw Error(ErrorCode::digest_mismatch, "report " + old_id + " has no replayed run");
    const auto expected = r.at("report").at("run_hash").get<std::string>();
    const auto actual = run_report(it->second).at("run_hash").get<std::string>();
    if (expected != actual) {
      throw Error(ErrorCode::digest_mismatch, "report " + old_id + ": expected run hash " + expected + ", got " + actual);
    }
  }
  return json{{"session_id", new_id}, {"cohort_id", target->id}, {"entries", log},
              {"n_reports", archive.value("reports", json::array()).size()}, {"all_match", true}};
}

}  // namespace cohortlab::service
