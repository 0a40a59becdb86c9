#include "cohortlab/stats/risk.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>

#include "cohortlab/error.hpp"

namespace cohortlab::stats {

using nlohmann::json;
using namespace cohortlab::cohort;

double pearson_chi_square(const RiskTable& t) {
  const double a = static_cast<double>(t.a), b = static_cast<double>(t.b), c = static_cast<double>(t.c),
               d = static_cast<double>(t.d);
  const double denom = (a + b) * (c + d) * (a + c) * (b + d);
  if (denom == 0.0) return 0.0;
  const double diff = a * d - b * c;
  return (a + b + c + d) * diff * diff / denom;
}

RiskEstimate relative_risk(const RiskTable& t, double confidence) {
  const double z = z_quantile(confidence);
  if (t.a + t.b == 0 || t.c + t.d == 0) {
    throw Error(ErrorCode::zero_margin,
                "relative risk needs subjects in both the exposed and the unexposed group; no continuity "
                "correction is applied, add one explicitly to the counts if intended");
  }
  if (t.a == 0 || t.c == 0) {
    throw Error(ErrorCode::zero_margin,
                "a group has no events, so the log-scale interval is undefined; no continuity correction is "
                "applied, add 0.5 to every cell explicitly if intended");
  }
  const double a = static_cast<double>(t.a), b = static_cast<double>(t.b), c = static_cast<double>(t.c),
               d = static_cast<double>(t.d);
  RiskEstimate r;
  r.confidence = confidence;
  r.rr = (a * (c + d)) / (c * (a + b));
  r.log_se = std::sqrt(1.0 / a - 1.0 / (a + b) + 1.0 / c - 1.0 / (c + d));
  r.ci.low = std::exp(std::log(r.rr) - z * r.log_se);
  r.ci.high = std::exp(std::log(r.rr) + z * r.log_se);
  r.chi_square = pearson_chi_square(t);
  r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(1.0), r.chi_square));
  r.classification = r.rr < 1.0 ? "protective" : (r.rr > 1.0 ? "risk" : "neutral");
  return r;
}

namespace {

struct Condition {
  std::vector<SelectionPredicate> preds;
  std::vector<const AttributeDef*> defs;

  Condition(const Cohort& cohort, std::vector<SelectionPredicate> p) : preds(std::move(p)) {
    if (preds.empty()) throw Error(ErrorCode::invalid_argument, "condition needs at least one predicate");
    for (const auto& q : preds) {
      check_predicate(q, cohort.dictionary);
      defs.push_back(&cohort.dictionary.at(q.attribute));
    }
  }
  std::optional<bool> eval(const SubjectRecord& s) const {
    bool ok = true;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i].op != PredicateOp::is_missing && is_missing(s.value(preds[i].attribute))) return std::nullopt;
      ok = ok && matches(preds[i], *defs[i], s);
    }
    return ok;
  }
};

void add(RiskTable& t, bool exposed, bool event) {
  if (exposed) {
    (event ? t.a : t.b) += 1;
  } else {
    (event ? t.c : t.d) += 1;
  }
}

}  // namespace

CohortRiskTable risk_table(const Cohort& cohort, const std::vector<SelectionPredicate>& exposure,
                           const std::vector<SelectionPredicate>& outcome) {
  const Condition ex(cohort, exposure), out(cohort, outcome);
  CohortRiskTable r;
  for (const auto& s : cohort.subjects) {
    const auto e = ex.eval(s);
    const auto o = out.eval(s);
    if (!e || !o) {
      ++r.n_missing;
      continue;
    }
    ++r.n_used;
    add(r.table, *e, *o);
  }
  return r;
}

Heterogeneity woolf_heterogeneity(const std::vector<RiskEstimate>& est) {
  Heterogeneity h;
  double sw = 0.0, swl = 0.0;
  for (const auto& e : est) {
    const double w = 1.0 / (e.log_se * e.log_se);
    sw += w;
    swl += w * std::log(e.rr);
  }
  const double pooled = swl / sw;
  for (const auto& e : est) {
    const double w = 1.0 / (e.log_se * e.log_se);
    h.q += w * std::pow(std::log(e.rr) - pooled, 2);
  }
  h.df = static_cast<double>(est.size()) - 1.0;
  h.pooled_rr = std::exp(pooled);
  h.p_value = h.df > 0.0 ? boost::math::cdf(boost::math::complement(boost::math::chi_squared(h.df), h.q)) : 1.0;
  return h;
}

InteractionResult interaction_terms(const Cohort& cohort, const std::vector<SelectionPredicate>& outcome,
                                    const std::vector<SelectionPredicate>& exposure, const std::string& stratum_attribute,
                                    const std::vector<double>& edges, double confidence) {
  const Condition ex(cohort, exposure), out(cohort, outcome);
  const auto& def = cohort.dictionary.at(stratum_attribute);
  z_quantile(confidence);
  InteractionResult r;
  r.stratum_attribute = stratum_attribute;
  r.confidence = confidence;
  std::vector<std::string> names;
  if (def.is_categorical()) {
    names = def.categories;
  } else {
    if (edges.size() < 2) throw Error(ErrorCode::invalid_argument, "scalar stratum attribute needs bin edges");
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      if (!(edges[i] < edges[i + 1])) throw Error(ErrorCode::invalid_argument, "bin edges must ascend");
      char buf[64];
      std::snprintf(buf, sizeof(buf), "[%g, %g%c", edges[i], edges[i + 1], i + 2 == edges.size() ? ']' : ')');
      names.emplace_back(buf);
    }
  }
  std::vector<RiskTable> tables(names.size());
  for (const auto& s : cohort.subjects) {
    const auto e = ex.eval(s);
    const auto o = out.eval(s);
    const auto v = numeric(s.value(stratum_attribute));
    std::optional<std::size_t> k;
    if (v) {
      if (def.is_categorical()) {
        k = static_cast<std::size_t>(*v);
      } else if (*v >= edges.front() && *v <= edges.back()) {
        std::size_t i = 0;
        while (i + 2 < edges.size() && *v >= edges[i + 1]) ++i;
        k = i;
      }
    }
    if (!e || !o || !k) {
      ++r.n_missing;
      continue;
    }
    ++r.n_used;
    add(tables[*k], *e, *o);
  }
  std::vector<RiskEstimate> usable;
  for (std::size_t i = 0; i < names.size(); ++i) {
    StratumRisk sr;
    sr.stratum = names[i];
    sr.table = tables[i];
    try {
      sr.estimate = relative_risk(tables[i], confidence);
      usable.push_back(*sr.estimate);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::zero_margin) throw;
      sr.excluded_reason = err.what();
    }
    r.strata.push_back(std::move(sr));
  }
  if (usable.size() >= 2) r.heterogeneity = woolf_heterogeneity(usable);
  return r;
}

json risk_table_to_json(const RiskTable& t) { return json{{"a", t.a}, {"b", t.b}, {"c", t.c}, {"d", t.d}}; }

json risk_to_json(const RiskEstimate& r) {
  return json{{"rr", r.rr},
              {"ci_low", r.ci.low},
              {"ci_high", r.ci.high},
              {"ci_method", "log_normal"},
              {"confidence", r.confidence},
              {"log_se", r.log_se},
              {"chi_square", r.chi_square},
              {"p_value", r.p_value},
              {"test", "pearson_chi_square_uncorrected"},
              {"classification", r.classification}};
}

json interaction_to_json(const InteractionResult& r) {
  json strata = json::array();
  for (const auto& s : r.strata) {
    json j{{"stratum", s.stratum}, {"table", risk_table_to_json(s.table)}};
    j["estimate"] = s.estimate ? risk_to_json(*s.estimate) : json(nullptr);
    if (!s.estimate) j["excluded_reason"] = s.excluded_reason;
    strata.push_back(j);
  }
  json out{{"stratum_attribute", r.stratum_attribute}, {"strata", strata}, {"n_used", r.n_used},
           {"n_missing", r.n_missing}, {"confidence", r.confidence}};
  if (r.heterogeneity) {
    out["heterogeneity"] = {{"test", "woolf"}, {"q", r.heterogeneity->q}, {"df", r.heterogeneity->df},
                            {"p_value", r.heterogeneity->p_value}, {"pooled_rr", r.heterogeneity->pooled_rr}};
  } else {
    out["heterogeneity"] = nullptr;
  }
  return out;
}

}  // namespace cohortlab::stats
