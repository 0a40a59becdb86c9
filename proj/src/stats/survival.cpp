#include "cohortlab/stats/survival.hpp"

#include <algorithm>
#include <cmath>

#include "cohortlab/error.hpp"
#include "cohortlab/stats/proportion.hpp"

namespace cohortlab::stats {

using nlohmann::json;

double SurvivalCurve::at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

SurvivalCurve kaplan_meier(const std::vector<SurvivalRecord>& records, double confidence) {
  if (records.empty()) throw Error(ErrorCode::empty_input, "Kaplan-Meier needs at least one record");
  const double z = z_quantile(confidence);
  std::vector<SurvivalRecord> r = records;
  for (const auto& x : r) {
    if (!(x.time >= 0.0) || !std::isfinite(x.time)) throw Error(ErrorCode::invalid_argument, "times must be >= 0");
  }
  std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  SurvivalCurve c;
  c.n = r.size();
  c.confidence = confidence;
  double s = 1.0, greenwood = 0.0;
  bool defined = true;
  std::size_t at_risk = r.size();
  for (std::size_t i = 0; i < r.size();) {
    std::size_t j = i, d = 0, censored = 0;
    while (j < r.size() && r[j].time == r[i].time) {
      if (r[j].event) {
        ++d;
      } else {
        ++censored;
        c.censor_times.push_back(r[j].time);
      }
      ++j;
    }
    if (d > 0) {
      const double n = static_cast<double>(at_risk), dd = static_cast<double>(d);
      s *= 1.0 - dd / n;
      if (d < at_risk) {
        greenwood += dd / (n * (n - dd));
      } else {
        defined = false;
      }
      c.times.push_back(r[i].time);
      c.survival.push_back(s);
      c.at_risk.push_back(at_risk);
      c.events.push_back(d);
      c.n_events += d;
      if (defined) {
        const double se = std::sqrt(greenwood);
        c.log_se.push_back(se);
        c.ci_low.push_back(std::clamp(s * std::exp(-z * se), 0.0, 1.0));
        c.ci_high.push_back(std::clamp(s * std::exp(z * se), 0.0, 1.0));
      } else {
        c.log_se.push_back(std::nullopt);
        c.ci_low.push_back(0.0);
        c.ci_high.push_back(0.0);
      }
    }
    at_risk -= d + censored;
    i = j;
  }
  return c;
}

SurvivalCurve kaplan_meier(const cohort::Cohort& cohort, const std::string& time_attribute,
                           const std::string& event_attribute, double confidence) {
  if (cohort.dictionary.at(time_attribute).kind != cohort::AttributeKind::scalar) {
    throw Error(ErrorCode::invalid_argument, "time attribute must be scalar");
  }
  if (cohort.dictionary.at(event_attribute).kind == cohort::AttributeKind::scalar) {
    throw Error(ErrorCode::invalid_argument, "event attribute must be categorical");
  }
  std::vector<SurvivalRecord> recs;
  std::size_t missing = 0;
  for (const auto& s : cohort.subjects) {
    const auto t = cohort::numeric(s.value(time_attribute));
    const auto e = cohort::numeric(s.value(event_attribute));
    if (!t || !e) {
      ++missing;
      continue;
    }
    recs.push_back({*t, *e == 1.0});
  }
  auto c = kaplan_meier(recs, confidence);
  c.n_missing = missing;
  return c;
}

json survival_to_json(const SurvivalCurve& c) {
  json se = json::array();
  for (const auto& v : c.log_se) se.push_back(v ? json(*v) : json(nullptr));
  return json{{"times", c.times},
              {"survival", c.survival},
              {"ci_low", c.ci_low},
              {"ci_high", c.ci_high},
              {"ci_method", "greenwood_log"},
              {"log_se", se},
              {"at_risk", c.at_risk},
              {"events", c.events},
              {"censor_times", c.censor_times},
              {"n_used", c.n},
              {"n_events", c.n_events},
              {"n_missing", c.n_missing},
              {"confidence", c.confidence}};
}

}  // namespace cohortlab::stats
