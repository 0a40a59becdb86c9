#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <thread>

#include "cohortlab/cohort/io.hpp"
#include "cohortlab/digest.hpp"
#include "cohortlab/error.hpp"
#include "cohortlab/service/engine.hpp"
#include "cohortlab/service/http.hpp"
#include "cohortlab/service/provenance.hpp"
#include "cohortlab/service/store.hpp"
#include "cohortlab/service/views.hpp"
#include "cohortlab/version.hpp"
#include "fixtures.hpp"
#include "httplib.h"

using namespace cohortlab;
using namespace cohortlab::service;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const json kSynthetic{{"synthetic", {{"spec", {{"n_subjects", 60}, {"n_clusters", 3}}}, {"seed", 3}}}};

json in_categories(const std::string& attr, const std::string& cat) {
  return json::array({{{"attribute", attr}, {"op", "in_categories"}, {"categories", {cat}}}});
}

const json kDbscan{{"algorithm", "mixed_dbscan"},
                   {"params", {{"eps", 0.2}, {"min_points", 3}, {"distance", {{"attributes", {"age", "weight_kg", "smoking"}}}}}}};
const json kShape{{"algorithm", "shape_hierarchical"}, {"params", {{"cut", {{"count", 3}}}}}};

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("cohortlab-" + tag + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no cohortlab::Error thrown";
  return ErrorCode::parse_error;
}

// Builds a full session: selection, two clustering runs and two estimators.
std::string populated_session(Engine& e, const std::string& cohort_id) {
  const auto s = e.create_session(cohort_id).at("session_id").get<std::string>();
  e.apply_selection(s, "female", in_categories("sex", "female"));
  e.run_clustering(s, kDbscan);
  const auto run = e.run_clustering(s, kShape).at("run_id").get<std::string>();
  e.query_stats(s, "kaplan_meier", {{"time_attribute", "followup_years"}, {"event_attribute", "deceased"}});
  e.query_stats(s, "group_significance", {{"attribute", "age"}, {"group_by", {{"run_id", run}}}});
  return s;
}

}  // namespace

TEST(Provenance, SequencesAreGapFree) {
  ProvenanceLog log;
  log.append("a", json::object(), json::object(), "d1");
  log.append("b", {{"x", 1}}, {{"in", "i"}}, "d2");
  EXPECT_EQ(log.entries()[1].sequence, 2u);
  const auto j = entry_to_json(log.entries()[1]);
  const auto back = entry_from_json(j);
  EXPECT_EQ(back.operation, "b");
  EXPECT_EQ(back.output_digest, "d2");
  ProvenanceLog other;
  ProvenanceEntry skip = back;
  EXPECT_EQ(code_of([&] { other.restore(skip); }), ErrorCode::invalid_argument);
  skip.sequence = 1;
  EXPECT_NO_THROW(other.restore(skip));
}

TEST(Store, RoundTripsAndRejectsDuplicateSequence) {
  TempDir dir("store");
  const auto path = (dir.path / "s.db").string();
  {
    Store s(path);
    s.put_cohort({"c1", "n", "{}", "id\n", "dg", "{}", ""});
    s.put_session({"s1", "c1", "2026-01-01T00:00:00Z"});
    s.put_selection({"s1", "all", "[]"});
    s.put_run({"s1-r1", "s1", "{}"});
    s.append_provenance({"s1", 1, "{}"});
    s.append_provenance({"s1", 2, "{}"});
    EXPECT_EQ(code_of([&] { s.append_provenance({"s1", 2, "{}"}); }), ErrorCode::io_error);
  }
  Store again(path);
  EXPECT_EQ(again.cohorts().size(), 1u);
  EXPECT_EQ(again.sessions().at(0).cohort_id, "c1");
  EXPECT_EQ(again.provenance().size(), 2u);
  EXPECT_EQ(again.provenance()[1].sequence, 2u);
}

TEST(ParallelSets, ToyCohortWidths) {
  // 30 exposed / 70 unexposed; pain frequency 20 / 10 / 50 / 20.
  const auto dict = cohort::parse_dictionary(json::parse(R"({"attributes": [
    {"name": "lift", "kind": "nominal", "categories": ["yes", "no"]},
    {"name": "pain", "kind": "ordinal", "categories": ["never", "rarely", "sometimes", "often"]},
    {"name": "age", "kind": "scalar"}]})"));
  std::string csv = "id,lift,pain,age\n";
  const char* pain[] = {"never", "rarely", "sometimes", "often"};
  const int counts[] = {20, 10, 50, 20};
  int i = 0;
  for (int k = 0; k < 4; ++k) {
    for (int c = 0; c < counts[k]; ++c, ++i) {
      csv += "S" + std::to_string(i) + "," + (i % 10 < 3 ? "yes" : "no") + "," + pain[k] + "," + std::to_string(20 + i % 50) + "\n";
    }
  }
  csv += "X1,,never,30\n";
  const auto c = cohort::parse_cohort(csv, dict).cohort;
  std::vector<bool> selected(c.subjects.size(), false);
  for (std::size_t s = 0; s < 25; ++s) selected[s] = true;
  const auto l = parallel_sets_layout(c, {"lift", "pain"}, {}, Highlight{"lift", "yes"}, selected);
  EXPECT_EQ(l.n_used, 100u);
  EXPECT_EQ(l.n_missing, 1u);
  EXPECT_EQ(l.axes[0].boxes[0].width, 30u);
  EXPECT_EQ(l.axes[0].boxes[1].width, 70u);
  EXPECT_TRUE(l.axes[0].boxes[0].highlight);
  std::vector<std::size_t> pw;
  for (const auto& b : l.axes[1].boxes) pw.push_back(b.width);
  EXPECT_EQ(pw, (std::vector<std::size_t>{20, 10, 50, 20}));
  std::size_t highlight = 0, sel = 0;
  for (const auto& r : l.ribbons) {
    if (r.from == "yes") EXPECT_EQ(r.highlight_width, r.width);
    highlight += r.highlight_width;
    sel += r.selected_width;
  }
  EXPECT_EQ(highlight, 30u);
  EXPECT_EQ(sel, 25u);

  const auto binned = parallel_sets_layout(c, {"age", "lift"}, {{"age", {20, 40, 70}}}, std::nullopt, selected);
  EXPECT_EQ(binned.axes[0].boxes.size(), 2u);
  EXPECT_EQ(code_of([&] { parallel_sets_layout(c, {"age", "lift"}, {}, std::nullopt, selected); }),
            ErrorCode::invalid_argument);

  auto broken = l;
  broken.ribbons[0].width += 1;
  EXPECT_THROW(check_conservation(broken), std::logic_error);
}

TEST(ParallelSets, ConservationProperty) {
  for (int seed = 0; seed < 40; ++seed) {
    std::mt19937_64 rng(seed);
    const auto c = fixtures::random_categorical_cohort(50 + 5 * static_cast<std::size_t>(seed), 2 + seed % 4, rng, 0.1);
    std::vector<std::string> attrs;
    for (const auto& a : c.dictionary.attributes()) attrs.push_back(a.name);
    std::vector<bool> selected(c.subjects.size());
    for (std::size_t i = 0; i < selected.size(); ++i) selected[i] = rng() % 2;
    const auto l = parallel_sets_layout(c, attrs, {}, std::nullopt, selected);
    for (std::size_t ax = 0; ax + 1 < attrs.size(); ++ax) {
      for (const auto& box : l.axes[ax].boxes) {
        std::size_t out = 0, out_sel = 0;
        for (const auto& r : l.ribbons) {
          if (r.axis == ax && r.from == box.category) {
            out += r.width;
            out_sel += r.selected_width;
          }
        }
        EXPECT_EQ(out, box.width);
        EXPECT_EQ(out_sel, box.selected_width);
      }
    }
    EXPECT_EQ(l.n_used + l.n_missing, c.subjects.size());
  }
}

TEST(Engine, SessionFlowAndProvenance) {
  Engine e;
  const auto ing = e.ingest(kSynthetic);
  const auto cid = ing.at("cohort_id").get<std::string>();
  EXPECT_EQ(ing.at("n_subjects"), 60);
  EXPECT_EQ(ing.at("n_centerlines"), 60);
  EXPECT_EQ(e.ingest(kSynthetic).at("cohort_id"), cid);
  EXPECT_EQ(e.attributes(cid).at("summaries").size(), e.cohort(cid)->cohort.dictionary.size());

  const auto s = populated_session(e, cid);
  const auto prov = e.provenance(s).at("entries");
  ASSERT_EQ(prov.size(), 6u);
  const std::vector<std::string> ops{"create_session", "apply_selection", "run_clustering", "run_clustering",
                                     "query_stats", "query_stats"};
  for (std::size_t i = 0; i < ops.size(); ++i) {
    EXPECT_EQ(prov[i].at("operation"), ops[i]);
    EXPECT_EQ(prov[i].at("sequence"), i + 1);
  }
  // The run respects the current selection.
  const auto report = e.run_report(s + "-r1");
  std::size_t females = 0;
  for (const auto& sub : e.cohort(cid)->cohort.subjects) females += cohort::numeric(sub.value("sex")) == 0.0;
  EXPECT_EQ(report.at("input").at("n_input"), females);

  e.apply_selection(s, "none", json::array({{{"attribute", "age"}, {"op", "value_range"}, {"min", 500}}}));
  EXPECT_EQ(code_of([&] { e.run_clustering(s, kDbscan); }), ErrorCode::empty_selection);
  EXPECT_EQ(code_of([&] { e.create_session("c-nope"); }), ErrorCode::not_found);
  EXPECT_EQ(code_of([&] { e.query_stats(s, "nope", json::object(), "female"); }), ErrorCode::unknown_estimator);
}

TEST(Engine, ExportReplayReproducesDigests) {
  Engine e;
  const auto cid = e.ingest(kSynthetic).at("cohort_id").get<std::string>();
  const auto s = populated_session(e, cid);
  const auto archive = json::parse(e.export_session(s).dump());
  EXPECT_EQ(archive.at("format"), kArchiveFormat);
  EXPECT_EQ(archive.at("reports").size(), 2u);
  const auto r = e.replay(archive);
  EXPECT_TRUE(r.at("all_match").get<bool>());
  const auto original = e.provenance(s).at("entries");
  const auto copy = e.provenance(r.at("session_id").get<std::string>()).at("entries");
  ASSERT_EQ(copy.size(), original.size());
  for (std::size_t i = 0; i < copy.size(); ++i) EXPECT_EQ(copy[i].at("output_digest"), original[i].at("output_digest"));

  // A replay into a fresh engine over the same data works as well.
  Engine other;
  other.ingest(kSynthetic);
  EXPECT_TRUE(other.replay(archive).at("all_match").get<bool>());
}

TEST(Engine, ReplayDetectsTamperedDataAndEntries) {
  Engine e;
  const auto cid = e.ingest(kSynthetic).at("cohort_id").get<std::string>();
  const auto s = populated_session(e, cid);
  const auto archive = e.export_session(s);

  // Same dictionary, one edited value.
  const auto& loaded = *e.cohort(cid);
  auto edited = loaded.cohort;
  edited.subjects[0].values["age"] = 99.5;
  const auto other = e.ingest({{"dictionary", cohort::dictionary_to_json(edited.dictionary)},
                               {"csv", cohort::format_cohort(edited)},
                               {"centerlines_csv", shape::format_centerlines(loaded.centerlines)}})
                         .at("cohort_id")
                         .get<std::string>();
  try {
    e.replay(archive, other);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::digest_mismatch);
    EXPECT_NE(std::string(err.what()).find(kCohortFile), std::string::npos) << err.what();
  }

  auto forged = archive;
  forged["provenance"][2]["output_digest"] = std::string(64, '0');
  try {
    e.replay(forged);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::digest_mismatch);
    EXPECT_NE(std::string(err.what()).find("provenance entry 3 (run_clustering)"), std::string::npos) << err.what();
  }
}

TEST(Engine, EmptySessionExportsAndReplays) {
  Engine e;
  const auto cid = e.ingest(kSynthetic).at("cohort_id").get<std::string>();
  const auto s = e.create_session(cid).at("session_id").get<std::string>();
  const auto archive = e.export_session(s);
  EXPECT_EQ(archive.at("provenance").size(), 1u);
  const auto r = e.replay(archive);
  EXPECT_EQ(r.at("entries").size(), 1u);
  EXPECT_EQ(r.at("n_reports"), 0);
}

TEST(Engine, ConcurrentSessionsAreIndependent) {
  Engine e;
  const auto cid = e.ingest(kSynthetic).at("cohort_id").get<std::string>();
  std::vector<std::string> ids(6);
  std::vector<std::string> hashes(6);
  std::vector<std::thread> threads;
  for (int t = 0; t < 6; ++t) {
    threads.emplace_back([&, t] {
      ids[t] = e.create_session(cid).at("session_id").get<std::string>();
      hashes[t] = e.run_clustering(ids[t], kDbscan).at("run_hash").get<std::string>();
      e.query_stats(ids[t], "summary", {{"attribute", "age"}});
    });
  }
  for (auto& th : threads) th.join();
  std::set<std::string> unique(ids.begin(), ids.end());
  EXPECT_EQ(unique.size(), 6u);
  for (int t = 0; t < 6; ++t) {
    EXPECT_EQ(hashes[t], hashes[0]);
    EXPECT_EQ(e.provenance(ids[t]).at("entries").size(), 3u);
  }
}

TEST(Engine, PersistentStoreRehydrates) {
  TempDir dir("rehydrate");
  const auto db = (dir.path / "cohortlab.db").string();
  std::string s, cid;
  json archive;
  {
    Engine e(db);
    cid = e.ingest(kSynthetic).at("cohort_id").get<std::string>();
    s = populated_session(e, cid);
    archive = e.export_session(s);
  }
  Engine again(db);
  EXPECT_EQ(again.session_ids(), std::vector<std::string>{s});
  EXPECT_EQ(again.provenance(s).at("entries"), archive.at("provenance"));
  EXPECT_EQ(again.run_report(s + "-r2").at("run_hash"), archive.at("reports")[1].at("report").at("run_hash"));
  // New sessions do not reuse persisted ids, and selections survive.
  const auto s2 = again.create_session(cid).at("session_id").get<std::string>();
  EXPECT_NE(s2, s);
  const auto count = again.apply_selection(s2, "female", in_categories("sex", "female")).at("count");
  EXPECT_EQ(again.query_stats(s2, "summary", {{"attribute", "age"}}, "female").at("n_selected"), count);
  EXPECT_TRUE(again.replay(archive).at("all_match").get<bool>());
}

TEST(Views, AllKindsThroughEngine) {
  Engine e;
  const auto cid = e.ingest(kSynthetic).at("cohort_id").get<std::string>();
  const auto s = e.create_session(cid).at("session_id").get<std::string>();
  e.apply_selection(s, "female", in_categories("sex", "female"));
  const auto db = e.run_clustering(s, kDbscan).at("run_id").get<std::string>();
  const auto sh = e.run_clustering(s, kShape).at("run_id").get<std::string>();
  EXPECT_EQ(view_names().size(), 6u);

  const auto pc = e.view(s, "parallel_coordinates", {{"attributes", {"age", "smoking"}}, {"run_id", db}});
  for (const auto& line : pc.at("polylines")) {
    for (const auto& p : line.at("positions")) {
      if (!p.is_null()) {
        EXPECT_GE(p.get<double>(), 0.0);
        EXPECT_LE(p.get<double>(), 1.0);
      }
    }
  }
  const auto sc = e.view(s, "scatterplot", {{"x", "height_cm"}, {"y", "weight_kg"}});
  EXPECT_TRUE(sc.at("regression").contains("slope"));
  const auto km = e.view(s, "km_plot", {{"time_attribute", "followup_years"}, {"event_attribute", "deceased"}});
  std::size_t females = 0;
  for (const auto& sub : e.cohort(cid)->cohort.subjects) females += cohort::numeric(sub.value("sex")) == 0.0;
  EXPECT_LE(km.at("n_used").get<std::size_t>(), females);
  const auto rb = e.view(s, "ribbon", {{"run_id", sh}});
  EXPECT_EQ(rb.at("ribbons").size(), 3u);
  const auto bt = e.view(s, "boxplot_tooltip", {{"run_id", sh}, {"cluster", 0}, {"attribute", "height_cm"}});
  EXPECT_TRUE(bt.dump().find("median") != std::string::npos);
  EXPECT_EQ(code_of([&] { e.view(s, "heatmap", json::object()); }), ErrorCode::invalid_argument);
}

TEST(Http, StatusMapping) {
  EXPECT_EQ(http_status(ErrorCode::not_found), 404);
  EXPECT_EQ(http_status(ErrorCode::digest_mismatch), 409);
  EXPECT_EQ(http_status(ErrorCode::empty_selection), 422);
  EXPECT_EQ(http_status(ErrorCode::zero_margin), 422);
  EXPECT_EQ(http_status(ErrorCode::io_error), 500);
  EXPECT_EQ(http_status(ErrorCode::parse_error), 400);
  EXPECT_EQ(http_status(ErrorCode::unknown_estimator), 400);
}

TEST(Http, DispatchRoutesAndErrors) {
  Engine e;
  auto call = [&](const std::string& m, const std::string& p, const json& body = nullptr) {
    return dispatch(e, m, p, body.is_null() ? "" : body.dump());
  };
  const auto health = call("GET", "/v1/health");
  EXPECT_EQ(health.status, 200);
  EXPECT_EQ(health.body.at("engine").at("version"), kEngineVersion);

  const auto ing = call("POST", "/v1/cohorts", kSynthetic);
  ASSERT_EQ(ing.status, 201);
  const auto cid = ing.body.at("cohort_id").get<std::string>();
  EXPECT_EQ(call("GET", "/v1/cohorts/" + cid + "/attributes").status, 200);
  const auto ses = call("POST", "/v1/sessions", {{"cohort_id", cid}});
  ASSERT_EQ(ses.status, 201);
  const auto sid = ses.body.at("session_id").get<std::string>();
  EXPECT_EQ(call("POST", "/v1/sessions/" + sid + "/selections", {{"name", "m"}, {"predicates", in_categories("sex", "male")}}).status, 201);
  const auto run = call("POST", "/v1/sessions/" + sid + "/runs", kDbscan);
  ASSERT_EQ(run.status, 201);
  EXPECT_EQ(call("GET", "/v1/runs/" + run.body.at("run_id").get<std::string>() + "/report").status, 200);
  const auto rr = call("POST", "/v1/sessions/" + sid + "/stats",
                       {{"estimator", "relative_risk"}, {"params", {{"table", {30, 70, 10, 90}}}}});
  EXPECT_EQ(rr.status, 200);
  EXPECT_DOUBLE_EQ(rr.body.at("result").at("rr").get<double>(), 3.0);
  EXPECT_EQ(call("POST", "/v1/sessions/" + sid + "/views", {{"view", "parallel_sets"}, {"params", {{"attributes", {"sex", "smoking"}}}}}).status, 200);
  // Views do not change state, so they are not logged.
  EXPECT_EQ(call("GET", "/v1/sessions/" + sid + "/provenance").body.at("entries").size(), 4u);
  const auto ex = call("GET", "/v1/sessions/" + sid + "/export");
  ASSERT_EQ(ex.status, 200);
  auto archive = ex.body;
  archive.erase("engine");
  const auto rep = call("POST", "/v1/replay", {{"archive", archive}});
  EXPECT_EQ(rep.status, 201);

  // Error paths.
  EXPECT_EQ(call("GET", "/v1/nothing").status, 404);
  const auto del = call("DELETE", "/v1/health");
  EXPECT_EQ(del.status, 405);
  EXPECT_EQ(del.body.at("error").at("code"), "MethodNotAllowed");
  EXPECT_EQ(call("GET", "/v1/nothing").body.at("error").at("code"), "NotFound");
  EXPECT_EQ(call("GET", "/v1/sessions/s999999/provenance").status, 404);
  const auto bad = dispatch(e, "POST", "/v1/cohorts", "{not json");
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(bad.body.at("error").at("code"), "ParseError");
  const auto zero = call("POST", "/v1/sessions/" + sid + "/stats",
                         {{"estimator", "relative_risk"}, {"params", {{"table", {0, 10, 5, 5}}}}});
  EXPECT_EQ(zero.status, 422);
  EXPECT_EQ(zero.body.at("error").at("code"), "ZeroMargin");
  auto tampered = archive;
  tampered["provenance"][1]["output_digest"] = std::string(64, 'f');
  EXPECT_EQ(call("POST", "/v1/replay", {{"archive", tampered}}).status, 409);
}

TEST(Http, LoopbackServer) {
  Engine e;
  HttpServer server(e);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);
  auto res = cli.Get("/v1/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("X-Engine-Version"), kEngineVersion);
  auto post = cli.Post("/v1/cohorts", kSynthetic.dump(), "application/json");
  ASSERT_TRUE(post);
  EXPECT_EQ(post->status, 201);
  EXPECT_EQ(json::parse(post->body).at("n_subjects"), 60);
  server.stop();
  th.join();
}
