#include "cohortlab/stats/registry.hpp"

#include <map>

#include "cohortlab/cohort/predicate.hpp"
#include "cohortlab/cohort/summary.hpp"
#include "cohortlab/error.hpp"
#include "cohortlab/shape/curvature.hpp"
#include "cohortlab/stats/pca.hpp"
#include "cohortlab/stats/proportion.hpp"
#include "cohortlab/stats/risk.hpp"
#include "cohortlab/stats/survival.hpp"
#include "cohortlab/stats/tests.hpp"
#include "cohortlab/stats/ushape.hpp"
#include "cohortlab/version.hpp"

namespace cohortlab::stats {

using nlohmann::json;
using namespace cohortlab::cohort;

namespace {

using Handler = std::function<json(const json&, const Cohort&, const EstimatorContext&)>;

std::vector<SelectionPredicate> preds(const json& p, const char* key, const Cohort& c) {
  if (!p.contains(key)) throw Error(ErrorCode::invalid_argument, std::string("missing parameter '") + key + "'");
  return predicates_from_json(p.at(key), c.dictionary);
}

double confidence(const json& p) { return p.value("confidence", 0.95); }

/// Grouping from {"group_by": "<categorical attribute>"} or {"group_by": {"run_id": "..."}}.
/// Cluster noise is left ungrouped.
Grouping grouping(const json& p, const Cohort& cohort, const EstimatorContext& ctx) {
  const auto& g = p.at("group_by");
  if (g.is_string()) return grouping_from_attribute(cohort, g.get<std::string>());
  const auto run_id = g.at("run_id").get<std::string>();
  const auto* run = ctx.find_run ? ctx.find_run(run_id) : nullptr;
  if (!run) throw Error(ErrorCode::not_found, "unknown run '" + run_id + "'");
  Grouping out;
  for (std::size_t k = 0; k < run->n_clusters; ++k) out.names.push_back("cluster " + std::to_string(k));
  for (const auto& s : cohort.subjects) {
    const auto l = run->label_of(s.id);
    out.group.push_back(l && *l != mixed::kNoise ? l : std::nullopt);
  }
  return out;
}

const std::map<std::string, Handler, std::less<>>& registry() {
  static const std::map<std::string, Handler, std::less<>> r{
      {"summary",
       [](const json& p, const Cohort& c, const EstimatorContext&) {
         return summary_to_json(attribute_summary(c, p.at("attribute").get<std::string>()));
       }},
      {"prevalence",
       [](const json& p, const Cohort& c, const EstimatorContext&) {
         return proportion_to_json(prevalence(c, preds(p, "condition", c), confidence(p)));
       }},
      {"incidence",
       [](const json& p, const Cohort& c, const EstimatorContext&) {
         if (p.contains("events")) {
           auto e = incidence(p.at("events").get<std::size_t>(), p.at("person_time").get<double>(), confidence(p));
           return incidence_to_json(e);
         }
         if (p.contains("records")) {
           std::vector<FollowUp> recs;
           for (const auto& r : p["records"]) {
             recs.push_back({r.value("entry", 0.0), r.at("exit").get<double>(), r.at("event").get<bool>()});
           }
           return incidence_to_json(incidence(recs, confidence(p)));
         }
         return incidence_to_json(incidence(c, p.at("time_attribute").get<std::string>(),
                                            p.at("event_attribute").get<std::string>(), confidence(p)));
       }},
      {"relative_risk",
       [](const json& p, const Cohort& c, const EstimatorContext&) {
         CohortRiskTable t;
         if (p.contains("table")) {
           const auto& j = p["table"];
           if (j.is_array()) {
             const auto v = j.get<std::vector<std::size_t>>();
             if (v.size() != 4) throw Error(ErrorCode::invalid_argument, "table needs four counts [a, b, c, d]");
             t.table = {v[0], v[1], v[2], v[3]};
           } else {
             t.table = {j.at("a").get<std::size_t>(), j.at("b").get<std::size_t>(), j.at("c").get<std::size_t>(),
                      j.at("d").get<std::size_t>()};
           }
           t.n_used = t.table.total();
         } else {
           t = risk_table(c, preds(p, "exposure", c), preds(p, "outcome", c));
         }
         json out = risk_to_json(relative_risk(t.table, confidence(p)));
         out["table"] = risk_table_to_json(t.table);
         out["n_used"] = t.n_used;
         out["n_missing"] = t.n_missing;
         return out;
       }},
      {"kaplan_meier",
       [](const json& p, const Cohort& c, const EstimatorContext&) {
         if (p.contains("records")) {
           std::vector<SurvivalRecord> recs;
           for (const auto& r : p["records"]) recs.push_back({r.at("time").get<double>(), r.at("event").get<bool>()});
           return survival_to_json(kaplan_meier(recs, confidence(p)));
         }
         const auto time = p.at("time_attribute").get<std::string>();
         const auto event = p.at("event_attribute").get<std::string>();
         if (!p.contains("stratify_by")) return survival_to_json(kaplan_meier(c, time, event, confidence(p)));
         const auto strat = p["stratify_by"].get<std::string>();
         const auto& def = c.dictionary.at(strat);
         if (!def.is_categorical()) throw Error(ErrorCode::invalid_argument, "stratify_by must be categorical");
         json curves = json::array();
         std::size_t used = 0, missing = 0;
         for (std::size_t k = 0; k < def.categories.size(); ++k) {
           Cohort sub;
           sub.dictionary = c.dictionary;
           for (const auto& s : c.subjects) {
             if (numeric(s.value(strat)) == static_cast<double>(k)) sub.subjects.push_back(s);
           }
           if (sub.subjects.empty()) continue;
           try {
             auto curve = kaplan_meier(sub, time, event, confidence(p));
             used += curve.n;
             missing += curve.n_missing;
             json j = survival_to_json(curve);
             j["stratum"] = def.categories[k];
             curves.push_back(j);
           } catch (const Error& e) {
             if (e.code() != ErrorCode::empty_input) throw;
             missing += sub.subjects.size();
           }
         }
         for (const auto& s : c.subjects) missing += is_missing(s.value(strat));
         return json{{"stratify_by", strat}, {"curves", curves}, {"n_used", used}, {"n_missing", missing},
                     {"confidence", confidence(p)}};
       }},
      {"interaction_terms",
       [](const json& p, const Cohort& c, const EstimatorContext&) {
         return interaction_to_json(interaction_terms(
             c, preds(p, "outcome", c), preds(p, "exposure", c), p.at("stratum_attribute").get<std::string>(),
             p.value("bin_edges", std::vector<double>{}), confidence(p)));
       }},
      {"u_shape_fit",
       [](const json& p, const Cohort& c, const EstimatorContext&) {
         return ushape_to_json(u_shape_fit(c, p.at("x_attribute").get<std::string>(), preds(p, "outcome", c),
                                           p.value("n_bins", std::size_t{10})));
       }},
      {"pca",
       [](const json& p, const Cohort& c, const EstimatorContext& ctx) {
         const auto r = pca(c, p.at("attributes").get<std::vector<std::string>>());
         json out = pca_to_json(r, p.value("include_scores", false));
         if (p.contains("group_by") && r.components.cols() >= 2) {
           const auto g = grouping(p, c, ctx);
           std::vector<int> groups;
           std::vector<Eigen::Index> rows;
           for (std::size_t i = 0; i < r.rows_used.size(); ++i) {
             if (const auto& gi = g.group[r.rows_used[i]]) {
               groups.push_back(*gi);
               rows.push_back(static_cast<Eigen::Index>(i));
             }
           }
           Eigen::MatrixX2d pts(static_cast<Eigen::Index>(rows.size()), 2);
           for (std::size_t i = 0; i < rows.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = r.scores.row(rows[i]).head<2>();
           json ell = ellipses_to_json(group_ellipses(pts, groups));
           for (auto& e : ell) e["group_name"] = g.names.at(static_cast<std::size_t>(e["group"].get<int>()));
           out["ellipses"] = ell;
         }
         return out;
       }},
      {"group_significance",
       [](const json& p, const Cohort& c, const EstimatorContext& ctx) {
         return significance_to_json(group_significance(c, grouping(p, c, ctx), p.at("attribute").get<std::string>()));
       }},
      {"group_curvature",
       [](const json& p, const Cohort& c, const EstimatorContext& ctx) {
         if (!ctx.centerlines) throw Error(ErrorCode::invalid_argument, "group_curvature needs centerlines");
         shape::BinSpec bins{p.value("bin_start", 150.0), p.value("bin_width", 10.0), p.value("bin_count", std::size_t{0})};
         return shape::group_curvature_to_json(shape::group_curvature_analysis(
             c, *ctx.centerlines, p.value("attribute", std::string("height_cm")), bins, confidence(p)));
       }},
  };
  return r;
}

}  // namespace

std::vector<std::string> estimator_names() {
  std::vector<std::string> out;
  for (const auto& [name, h] : registry()) out.push_back(name);
  return out;
}

json evaluate_estimator(const std::string& name, const json& params, const Cohort& cohort,
                        const EstimatorContext& context) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw Error(ErrorCode::unknown_estimator, "unknown estimator '" + name + "'");
  const json p = params.is_null() ? json::object() : params;
  json result;
  try {
    result = it->second(p, cohort, context);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, "parameters of " + name + ": " + e.what());
  }
  json out{{"estimator", name}, {"params", p}, {"result", result}, {"engine_version", kEngineVersion}};
  out["n_used"] = result.value("n_used", json(nullptr));
  out["n_missing"] = result.value("n_missing", json(nullptr));
  return out;
}

}  // namespace cohortlab::stats
