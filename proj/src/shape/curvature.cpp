#include "cohortlab/shape/curvature.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <map>
#include <numeric>

#include "cohortlab/error.hpp"

namespace cohortlab::shape {

using nlohmann::json;

CurvatureProfile curvature_profile(const std::vector<Vec3>& pts) {
  if (pts.size() < 3) throw Error(ErrorCode::invalid_argument, "curvature needs at least 3 points");
  CurvatureProfile out;
  out.curvature.assign(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double seg = (pts[i] - pts[i - 1]).norm();
    if (seg == 0.0) throw Error(ErrorCode::invalid_argument, "repeated point at index " + std::to_string(i));
    out.arc_length += seg;
  }
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec3 a = pts[i] - pts[i - 1], b = pts[i + 1] - pts[i], c = pts[i + 1] - pts[i - 1];
    const double denom = a.norm() * b.norm() * c.norm();
    out.curvature[i] = denom > 0.0 ? 2.0 * a.cross(b).norm() / denom : 0.0;
  }
  out.curvature.front() = out.curvature[1];
  out.curvature.back() = out.curvature[pts.size() - 2];
  out.mean = std::accumulate(out.curvature.begin(), out.curvature.end(), 0.0) / static_cast<double>(pts.size());
  out.max = *std::max_element(out.curvature.begin(), out.curvature.end());
  return out;
}

namespace {

std::vector<double> mid_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::invalid_argument, "spearman needs paired data");
  return pearson(mid_ranks(x), mid_ranks(y));
}

GroupCurvatureResult group_curvature_analysis(const std::vector<std::optional<double>>& values,
                                              const std::vector<double>& curv, const BinSpec& spec,
                                              double confidence) {
  if (values.size() != curv.size()) throw Error(ErrorCode::invalid_argument, "values and curvatures differ in length");
  if (!(spec.width > 0.0)) throw Error(ErrorCode::invalid_argument, "bin width must be positive");
  GroupCurvatureResult out;
  out.bins_spec = spec;
  out.confidence = confidence;
  std::size_t n_bins = spec.count;
  if (n_bins == 0) {
    double hi = spec.start;
    for (const auto& v : values) {
      if (v) hi = std::max(hi, *v);
    }
    n_bins = static_cast<std::size_t>(std::floor((hi - spec.start) / spec.width)) + 1;
  }
  std::vector<std::vector<double>> members(n_bins);
  std::vector<double> bin_index, used_curv;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) {
      ++out.n_missing;
      continue;
    }
    const double rel = (*values[i] - spec.start) / spec.width;
    if (rel < 0.0 || rel >= static_cast<double>(n_bins)) {
      ++out.n_out_of_bins;
      continue;
    }
    const auto k = static_cast<std::size_t>(std::floor(rel));
    members[k].push_back(curv[i]);
    bin_index.push_back(static_cast<double>(k));
    used_curv.push_back(curv[i]);
  }
  out.n_used = used_curv.size();
  std::size_t non_empty = 0;
  for (std::size_t k = 0; k < n_bins; ++k) {
    CurvatureBin b;
    b.lower = spec.start + static_cast<double>(k) * spec.width;
    b.upper = b.lower + spec.width;
    b.n = members[k].size();
    if (b.n > 0) {
      ++non_empty;
      const double mean = std::accumulate(members[k].begin(), members[k].end(), 0.0) / static_cast<double>(b.n);
      b.mean = mean;
      if (b.n > 1) {
        double ss = 0.0;
        for (double v : members[k]) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(b.n - 1));
        b.sd = sd;
        boost::math::students_t t(static_cast<double>(b.n - 1));
        const double half = boost::math::quantile(t, 0.5 + confidence / 2.0) * sd / std::sqrt(static_cast<double>(b.n));
        b.ci_low = mean - half;
        b.ci_high = mean + half;
      }
    }
    out.bins.push_back(b);
  }
  if (non_empty >= 2 && out.n_used >= 3) {
    TrendTest t;
    t.rho = spearman_rho(bin_index, used_curv);
    t.df = static_cast<double>(out.n_used) - 2.0;
    const double r2 = std::min(t.rho * t.rho, 1.0 - 1e-15);
    t.statistic = t.rho * std::sqrt(t.df / (1.0 - r2));
    boost::math::students_t dist(t.df);
    t.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t.statistic)));
    t.direction = t.rho < 0.0 ? "decreasing" : (t.rho > 0.0 ? "increasing" : "flat");
    out.trend = t;
  }
  return out;
}

GroupCurvatureResult group_curvature_analysis(const cohort::Cohort& cohort, const std::vector<Centerline>& lines,
                                              const std::string& attribute, const BinSpec& bins, double confidence) {
  const auto& def = cohort.dictionary.at(attribute);
  if (def.kind != cohort::AttributeKind::scalar) {
    throw Error(ErrorCode::invalid_argument, "grouping attribute '" + attribute + "' must be scalar");
  }
  std::map<std::string, const Centerline*, std::less<>> by_id;
  for (const auto& c : lines) by_id[c.subject_id] = &c;
  std::vector<std::optional<double>> values;
  std::vector<double> curv;
  for (const auto& s : cohort.subjects) {
    const auto it = by_id.find(s.id);
    const auto v = cohort::numeric(s.value(attribute));
    if (it == by_id.end()) {
      values.push_back(std::nullopt);
      curv.push_back(0.0);
      continue;
    }
    values.push_back(v);
    curv.push_back(curvature_profile(it->second->points).mean);
  }
  auto out = group_curvature_analysis(values, curv, bins, confidence);
  out.attribute = attribute;
  return out;
}

json curvature_to_json(const CurvatureProfile& p) {
  return json{{"curvature", p.curvature}, {"mean", p.mean}, {"max", p.max}, {"arc_length", p.arc_length}};
}

json group_curvature_to_json(const GroupCurvatureResult& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json bins = json::array();
  for (const auto& b : r.bins) {
    bins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"n", b.n}, {"empty", b.n == 0}, {"mean", opt(b.mean)},
                    {"sd", opt(b.sd)}, {"ci_low", opt(b.ci_low)}, {"ci_high", opt(b.ci_high)}});
  }
  json out{{"attribute", r.attribute},
           {"bin_start", r.bins_spec.start},
           {"bin_width", r.bins_spec.width},
           {"confidence", r.confidence},
           {"bins", bins},
           {"n_used", r.n_used},
           {"n_missing", r.n_missing},
           {"n_out_of_bins", r.n_out_of_bins}};
  if (r.trend) {
    out["trend"] = {{"test", "spearman_bin_index"}, {"rho", r.trend->rho},       {"statistic", r.trend->statistic},
                    {"df", r.trend->df},             {"p_value", r.trend->p_value}, {"direction", r.trend->direction}};
  } else {
    out["trend"] = nullptr;
  }
  return out;
}

}  // namespace cohortlab::shape
