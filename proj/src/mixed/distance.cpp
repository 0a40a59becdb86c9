#include "cohortlab/mixed/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cohortlab/cohort/summary.hpp"
#include "cohortlab/error.hpp"

namespace cohortlab::mixed {

using nlohmann::json;
using namespace cohortlab::cohort;

std::string_view to_string(ScalarNormalization n) noexcept { return n == ScalarNormalization::iqr ? "iqr" : "range"; }

std::string_view to_string(MissingPolicy p) noexcept {
  return p == MissingPolicy::impute_max ? "impute_max" : "pairwise_exclude_renormalize";
}

ScalarNormalization parse_normalization(std::string_view text) {
  if (text == "range") return ScalarNormalization::range;
  if (text == "iqr") return ScalarNormalization::iqr;
  throw Error(ErrorCode::invalid_argument, "unknown scalar normalization '" + std::string(text) + "'");
}

MissingPolicy parse_missing_policy(std::string_view text) {
  if (text == "pairwise_exclude_renormalize") return MissingPolicy::pairwise_exclude_renormalize;
  if (text == "impute_max") return MissingPolicy::impute_max;
  throw Error(ErrorCode::invalid_argument, "unknown missing policy '" + std::string(text) + "'");
}

void MixedDistanceSpec::validate(const DataDictionary& dictionary) const {
  if (attributes.empty()) throw Error(ErrorCode::invalid_argument, "distance spec lists no attributes");
  if (!weights.empty() && weights.size() != attributes.size()) {
    throw Error(ErrorCode::invalid_argument, "one weight per attribute required");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < attributes.size(); ++k) {
    dictionary.at(attributes[k]);
    if (std::count(attributes.begin(), attributes.end(), attributes[k]) > 1) {
      throw Error(ErrorCode::invalid_argument, "attribute '" + attributes[k] + "' listed twice");
    }
    const double w = weight(k);
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::invalid_argument, "weights must be >= 0");
    total += w;
  }
  if (total == 0.0) throw Error(ErrorCode::invalid_argument, "weights are all zero");
}

json spec_to_json(const MixedDistanceSpec& spec) {
  std::vector<double> w = spec.weights;
  if (w.empty()) w.assign(spec.attributes.size(), 1.0);
  return json{{"attributes", spec.attributes},
              {"weights", w},
              {"scalar_normalization", to_string(spec.normalization)},
              {"missing_policy", to_string(spec.missing_policy)},
              {"ordinal_distance", "normalized_rank"}};
}

MixedDistanceSpec spec_from_json(const json& j) {
  MixedDistanceSpec s;
  try {
    s.attributes = j.at("attributes").get<std::vector<std::string>>();
    if (j.contains("weights") && !j["weights"].is_null()) s.weights = j["weights"].get<std::vector<double>>();
    s.normalization = parse_normalization(j.value("scalar_normalization", std::string("range")));
    s.missing_policy = parse_missing_policy(j.value("missing_policy", std::string("pairwise_exclude_renormalize")));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("distance spec: ") + e.what());
  }
  return s;
}

MixedMetric::MixedMetric(const DataDictionary& dictionary, MixedDistanceSpec spec, std::span<const SubjectRecord> records)
    : spec_(std::move(spec)) {
  spec_.validate(dictionary);
  for (const auto& name : spec_.attributes) defs_.push_back(&dictionary.at(name));
  normalizers_.assign(defs_.size(), 0.0);
  for (std::size_t k = 0; k < defs_.size(); ++k) {
    if (defs_[k]->kind != AttributeKind::scalar) continue;
    std::vector<double> xs;
    for (const auto& r : records) {
      if (!usable(r)) continue;
      if (const auto v = numeric(r.value(defs_[k]->name))) xs.push_back(*v);
    }
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    double norm = xs.back() - xs.front();
    if (spec_.normalization == ScalarNormalization::iqr) {
      const double iqr = quantile_sorted(xs, 0.75) - quantile_sorted(xs, 0.25);
      if (iqr > 0.0) norm = iqr;  // a zero IQR falls back to the range
    }
    normalizers_[k] = norm;
  }
}

bool MixedMetric::usable(const SubjectRecord& r) const {
  if (spec_.missing_policy == MissingPolicy::impute_max) return true;
  for (std::size_t k = 0; k < defs_.size(); ++k) {
    if (spec_.weight(k) > 0.0 && !is_missing(r.value(defs_[k]->name))) return true;
  }
  return false;
}

std::optional<double> MixedMetric::attribute_distance(std::size_t k, const Value& a, const Value& b) const {
  if (is_missing(a) || is_missing(b)) return std::nullopt;
  const auto& def = *defs_[k];
  switch (def.kind) {
    case AttributeKind::nominal: return std::get<CategoryIndex>(a).index == std::get<CategoryIndex>(b).index ? 0.0 : 1.0;
    case AttributeKind::ordinal: {
      const auto levels = def.categories.size();
      if (levels < 2) return 0.0;
      return std::abs(std::get<OrdinalRank>(a).rank - std::get<OrdinalRank>(b).rank) /
             static_cast<double>(levels - 1);
    }
    case AttributeKind::scalar: {
      const double d = std::abs(std::get<double>(a) - std::get<double>(b));
      if (d == 0.0) return 0.0;
      if (normalizers_[k] <= 0.0) return 1.0;
      return std::min(1.0, d / normalizers_[k]);
    }
  }
  return std::nullopt;
}

std::optional<double> MixedMetric::operator()(const SubjectRecord& a, const SubjectRecord& b) const {
  if (a.id == b.id) return 0.0;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < defs_.size(); ++k) {
    const double w = spec_.weight(k);
    if (w == 0.0) continue;
    const auto d = attribute_distance(k, a.value(defs_[k]->name), b.value(defs_[k]->name));
    if (d) {
      num += w * *d;
      den += w;
    } else if (spec_.missing_policy == MissingPolicy::impute_max) {
      num += w;
      den += w;
    }
  }
  if (den == 0.0) return std::nullopt;
  return std::clamp(num / den, 0.0, 1.0);
}

Eigen::MatrixXd distance_matrix(const MixedMetric& metric, std::span<const SubjectRecord> records) {
  const auto n = static_cast<Eigen::Index>(records.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto v = metric(records[static_cast<std::size_t>(i)], records[static_cast<std::size_t>(j)]);
      d(i, j) = d(j, i) = v ? *v : std::numeric_limits<double>::infinity();
    }
  }
  return d;
}

}  // namespace cohortlab::mixed
