#include "cohortlab/stats/proportion.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "cohortlab/error.hpp"

namespace cohortlab::stats {

using nlohmann::json;
using namespace cohortlab::cohort;

double z_quantile(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "confidence must lie in (0, 1)");
  }
  return boost::math::quantile(boost::math::normal(), 0.5 + confidence / 2.0);
}

Interval wilson_interval(std::size_t k, std::size_t n, double confidence) {
  if (n == 0) throw Error(ErrorCode::empty_input, "proportion of zero subjects");
  if (k > n) throw Error(ErrorCode::invalid_argument, "k exceeds n");
  const double z = z_quantile(confidence);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
  Interval ci{std::max(0.0, centre - half), std::min(1.0, centre + half)};
  if (k == 0) ci.low = 0.0;
  if (k == n) ci.high = 1.0;
  return ci;
}

ProportionEstimate proportion(std::size_t k, std::size_t n, double confidence) {
  ProportionEstimate e;
  e.ci = wilson_interval(k, n, confidence);
  e.k = k;
  e.n_used = n;
  e.proportion = static_cast<double>(k) / static_cast<double>(n);
  e.confidence = confidence;
  return e;
}

ProportionEstimate prevalence(const Cohort& cohort, const std::vector<SelectionPredicate>& condition,
                              double confidence) {
  std::vector<const AttributeDef*> defs;
  for (const auto& p : condition) {
    check_predicate(p, cohort.dictionary);
    defs.push_back(&cohort.dictionary.at(p.attribute));
  }
  std::size_t k = 0, n = 0, missing = 0;
  for (const auto& s : cohort.subjects) {
    bool skip = false, ok = true;
    for (std::size_t i = 0; i < condition.size(); ++i) {
      if (condition[i].op != PredicateOp::is_missing && is_missing(s.value(condition[i].attribute))) skip = true;
      ok = ok && matches(condition[i], *defs[i], s);
    }
    if (skip) {
      ++missing;
      continue;
    }
    ++n;
    k += ok;
  }
  if (n == 0) throw Error(ErrorCode::empty_input, "no subject with complete condition attributes");
  auto e = proportion(k, n, confidence);
  e.n_missing = missing;
  return e;
}

IncidenceEstimate incidence(std::size_t events, double person_time, double confidence) {
  if (!(person_time > 0.0)) throw Error(ErrorCode::zero_margin, "incidence needs positive person time");
  const double alpha = 1.0 - confidence;
  z_quantile(confidence);
  IncidenceEstimate e;
  e.events = events;
  e.person_time = person_time;
  e.rate = static_cast<double>(events) / person_time;
  e.confidence = confidence;
  const double k = static_cast<double>(events);
  if (events == 0) {
    e.ci = {0.0, -std::log(alpha) / person_time};
  } else {
    e.ci.low = boost::math::quantile(boost::math::chi_squared(2.0 * k), alpha / 2.0) / 2.0 / person_time;
    e.ci.high = boost::math::quantile(boost::math::chi_squared(2.0 * k + 2.0), 1.0 - alpha / 2.0) / 2.0 / person_time;
  }
  return e;
}

IncidenceEstimate incidence(const std::vector<FollowUp>& records, double confidence) {
  std::size_t events = 0;
  double pt = 0.0;
  for (const auto& r : records) {
    if (r.exit < r.entry) throw Error(ErrorCode::invalid_argument, "follow-up exit precedes entry");
    pt += r.exit - r.entry;
    events += r.event;
  }
  auto e = incidence(events, pt, confidence);
  e.n_used = records.size();
  return e;
}

IncidenceEstimate incidence(const Cohort& cohort, const std::string& time_attribute, const std::string& event_attribute,
                            double confidence) {
  if (cohort.dictionary.at(time_attribute).kind != AttributeKind::scalar) {
    throw Error(ErrorCode::invalid_argument, "time attribute must be scalar");
  }
  if (cohort.dictionary.at(event_attribute).kind == AttributeKind::scalar) {
    throw Error(ErrorCode::invalid_argument, "event attribute must be categorical");
  }
  std::vector<FollowUp> recs;
  std::size_t missing = 0;
  for (const auto& s : cohort.subjects) {
    const auto t = numeric(s.value(time_attribute));
    const auto ev = numeric(s.value(event_attribute));
    if (!t || !ev) {
      ++missing;
      continue;
    }
    recs.push_back({0.0, *t, *ev == 1.0});
  }
  auto e = incidence(recs, confidence);
  e.n_missing = missing;
  return e;
}

json proportion_to_json(const ProportionEstimate& p) {
  return json{{"k", p.k},
              {"n_used", p.n_used},
              {"n_missing", p.n_missing},
              {"proportion", p.proportion},
              {"ci_low", p.ci.low},
              {"ci_high", p.ci.high},
              {"ci_method", "wilson"},
              {"confidence", p.confidence}};
}

json incidence_to_json(const IncidenceEstimate& e) {
  return json{{"events", e.events},
              {"person_time", e.person_time},
              {"rate", e.rate},
              {"ci_low", e.ci.low},
              {"ci_high", e.ci.high},
              {"ci_method", e.events == 0 ? "poisson_exact_one_sided" : "poisson_exact"},
              {"confidence", e.confidence},
              {"n_used", e.n_used},
              {"n_missing", e.n_missing}};
}

}  // namespace cohortlab::stats
