#include "cohortlab/cohort/summary.hpp"

#include <algorithm>
#include <cmath>

#include "cohortlab/error.hpp"

namespace cohortlab::cohort {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::empty_input, "quantile of empty data");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

FiveNumber five_number_summary(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::empty_input, "five-number summary of empty data");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return {v.front(), quantile_sorted(v, 0.25), quantile_sorted(v, 0.5), quantile_sorted(v, 0.75),
          v.back()};
}

Moments moments(std::span<const double> values) {
  Moments m;
  m.n = values.size();
  if (m.n == 0) return m;
  double sum = 0.0;
  for (double x : values) sum += x;
  m.mean = sum / static_cast<double>(m.n);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : values) {
    const double d = x - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double n = static_cast<double>(m.n);
  m.sd = m.n > 1 ? std::sqrt(m2 / (n - 1.0)) : 0.0;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  // Relative threshold: rounding in the mean leaves m2 ~ eps^2 * mean^2 for constant data.
  const double scale = std::max(1.0, m.mean * m.mean);
  if (m.n > 1 && m2 > 1e-24 * scale) {
    m.skewness = m3 / std::pow(m2, 1.5);
    m.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return m;
}

std::vector<double> numeric_values(const Cohort& cohort, std::string_view attribute,
                                   std::size_t* n_missing) {
  cohort.dictionary.at(attribute);
  std::vector<double> out;
  std::size_t missing = 0;
  for (const auto& s : cohort.subjects) {
    if (auto v = numeric(s.value(attribute))) {
      out.push_back(*v);
    } else {
      ++missing;
    }
  }
  if (n_missing) *n_missing = missing;
  return out;
}

SummaryStats attribute_summary(const Cohort& cohort, std::string_view attribute) {
  const AttributeDef& def = cohort.dictionary.at(attribute);
  SummaryStats s;
  s.attribute = def.name;
  s.kind = def.kind;
  auto values = numeric_values(cohort, attribute, &s.n_missing);
  s.n_used = values.size();
  if (def.is_categorical()) {
    s.frequencies.reserve(def.categories.size());
    for (const auto& c : def.categories) s.frequencies.push_back({c, 0});
    for (double v : values) ++s.frequencies.at(static_cast<std::size_t>(v)).count;
    return s;
  }
  if (!values.empty()) {
    s.moments = moments(values);
    s.quartiles = five_number_summary(values);
  }
  return s;
}

nlohmann::json summary_to_json(const SummaryStats& s) {
  nlohmann::json j{{"attribute", s.attribute},
                   {"kind", to_string(s.kind)},
                   {"n_used", s.n_used},
                   {"n_missing", s.n_missing}};
  if (s.moments) {
    j["mean"] = s.moments->mean;
    j["sd"] = s.moments->sd;
    j["skewness"] = s.moments->skewness ? nlohmann::json(*s.moments->skewness) : nlohmann::json();
    j["kurtosis"] = s.moments->kurtosis ? nlohmann::json(*s.moments->kurtosis) : nlohmann::json();
  }
  if (s.quartiles) {
    j["quartiles"] = {s.quartiles->min, s.quartiles->q1, s.quartiles->median, s.quartiles->q3,
                      s.quartiles->max};
  }
  if (!s.frequencies.empty()) {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& e : s.frequencies) f.push_back({{"category", e.category}, {"count", e.count}});
    j["frequencies"] = std::move(f);
  }
  return j;
}

}  // namespace cohortlab::cohort
