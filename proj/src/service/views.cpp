#include "cohortlab/service/views.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "cohortlab/cohort/io.hpp"
#include "cohortlab/cohort/predicate.hpp"
#include "cohortlab/error.hpp"
#include "cohortlab/mixed/run.hpp"
#include "cohortlab/shape/alignment.hpp"
#include "cohortlab/shape/ribbon.hpp"
#include "cohortlab/stats/survival.hpp"

namespace cohortlab::service {

using nlohmann::json;
using namespace cohortlab::cohort;

namespace {

struct AxisCoder {
  const AttributeDef* def = nullptr;
  std::vector<double> edges;
  std::vector<std::string> labels;

  std::optional<std::size_t> code(const SubjectRecord& s) const {
    const auto v = numeric(s.value(def->name));
    if (!v) return std::nullopt;
    if (def->is_categorical()) return static_cast<std::size_t>(*v);
    if (*v < edges.front() || *v > edges.back()) return std::nullopt;
    std::size_t i = 0;
    while (i + 2 < edges.size() && *v >= edges[i + 1]) ++i;
    return i;
  }
};

AxisCoder make_coder(const Cohort& cohort, const std::string& attribute,
                     const std::map<std::string, std::vector<double>, std::less<>>& bins) {
  AxisCoder c;
  c.def = &cohort.dictionary.at(attribute);
  if (c.def->is_categorical()) {
    c.labels = c.def->categories;
    return c;
  }
  const auto it = bins.find(attribute);
  if (it == bins.end() || it->second.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "scalar attribute '" + attribute + "' needs bin edges for parallel sets");
  }
  c.edges = it->second;
  for (std::size_t i = 0; i + 1 < c.edges.size(); ++i) {
    if (!(c.edges[i] < c.edges[i + 1])) throw Error(ErrorCode::invalid_argument, "bin edges must ascend");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "[%g, %g%c", c.edges[i], c.edges[i + 1], i + 2 == c.edges.size() ? ']' : ')');
    c.labels.emplace_back(buf);
  }
  return c;
}

}  // namespace

void check_conservation(const ParallelSetsLayout& layout) {
  for (std::size_t a = 0; a + 1 < layout.axes.size(); ++a) {
    for (const auto& box : layout.axes[a].boxes) {
      std::size_t out = 0;
      for (const auto& r : layout.ribbons) {
        if (r.axis == a && r.from == box.category) out += r.width;
      }
      if (out != box.width) throw std::logic_error("parallel sets: ribbons out of " + box.category + " do not sum to its width");
    }
    for (const auto& box : layout.axes[a + 1].boxes) {
      std::size_t in = 0;
      for (const auto& r : layout.ribbons) {
        if (r.axis == a && r.to == box.category) in += r.width;
      }
      if (in != box.width) throw std::logic_error("parallel sets: ribbons into " + box.category + " do not sum to its width");
    }
  }
  for (const auto& axis : layout.axes) {
    std::size_t total = 0;
    for (const auto& b : axis.boxes) total += b.width;
    if (total != layout.n_used) throw std::logic_error("parallel sets: box widths do not sum to the used count");
  }
}

ParallelSetsLayout parallel_sets_layout(const Cohort& cohort, const std::vector<std::string>& attributes,
                                        const std::map<std::string, std::vector<double>, std::less<>>& bins,
                                        const std::optional<Highlight>& highlight, const std::vector<bool>& selected) {
  if (attributes.empty()) throw Error(ErrorCode::invalid_argument, "parallel sets need at least one attribute");
  if (selected.size() != cohort.subjects.size()) throw Error(ErrorCode::invalid_argument, "selection size mismatch");
  std::vector<AxisCoder> coders;
  for (const auto& a : attributes) coders.push_back(make_coder(cohort, a, bins));
  std::optional<std::pair<std::size_t, int>> hl;  // (axis, category code)
  const AttributeDef* hl_def = nullptr;
  std::optional<int> hl_code;
  if (highlight) {
    hl_def = &cohort.dictionary.at(highlight->attribute);
    if (!hl_def->is_categorical()) throw Error(ErrorCode::invalid_argument, "highlight attribute must be categorical");
    hl_code = hl_def->category_index(highlight->category);
    if (!hl_code) throw Error(ErrorCode::invalid_argument, "unknown highlight category '" + highlight->category + "'");
  }

  ParallelSetsLayout out;
  const auto n_axes = coders.size();
  std::vector<std::vector<std::size_t>> box(n_axes), box_sel(n_axes);
  for (std::size_t a = 0; a < n_axes; ++a) {
    box[a].assign(coders[a].labels.size(), 0);
    box_sel[a].assign(coders[a].labels.size(), 0);
  }
  // (axis, from, to) -> (width, selected, highlighted)
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::array<std::size_t, 3>> ribbons;
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto& s = cohort.subjects[i];
    std::vector<std::size_t> codes;
    for (const auto& c : coders) {
      const auto k = c.code(s);
      if (!k) break;
      codes.push_back(*k);
    }
    if (codes.size() != n_axes) {
      ++out.n_missing;
      continue;
    }
    ++out.n_used;
    const bool is_hl = hl_def && numeric(s.value(hl_def->name)) == static_cast<double>(*hl_code);
    for (std::size_t a = 0; a < n_axes; ++a) {
      ++box[a][codes[a]];
      box_sel[a][codes[a]] += selected[i];
      if (a + 1 < n_axes) {
        auto& r = ribbons[{a, codes[a], codes[a + 1]}];
        ++r[0];
        r[1] += selected[i];
        r[2] += is_hl;
      }
    }
  }
  for (std::size_t a = 0; a < n_axes; ++a) {
    ParallelSetsAxis axis;
    axis.attribute = attributes[a];
    for (std::size_t k = 0; k < coders[a].labels.size(); ++k) {
      const bool h = highlight && highlight->attribute == attributes[a] && static_cast<int>(k) == *hl_code;
      axis.boxes.push_back({coders[a].labels[k], box[a][k], box_sel[a][k], h});
    }
    out.axes.push_back(std::move(axis));
  }
  for (const auto& [key, w] : ribbons) {
    const auto& [a, from, to] = key;
    out.ribbons.push_back({a, coders[a].labels[from], coders[a + 1].labels[to], w[0], w[1], w[2]});
  }
  check_conservation(out);
  return out;
}

json parallel_sets_to_json(const ParallelSetsLayout& l) {
  json axes = json::array();
  for (const auto& a : l.axes) {
    json boxes = json::array();
    for (const auto& b : a.boxes) {
      boxes.push_back({{"category", b.category}, {"width", b.width}, {"selected_width", b.selected_width},
                       {"highlight", b.highlight}});
    }
    axes.push_back({{"attribute", a.attribute}, {"boxes", boxes}});
  }
  json ribbons = json::array();
  for (const auto& r : l.ribbons) {
    ribbons.push_back({{"axis", r.axis}, {"from", r.from}, {"to", r.to}, {"width", r.width},
                       {"selected_width", r.selected_width}, {"highlight_width", r.highlight_width},
                       {"highlight", r.highlight_width > 0}});
  }
  return json{{"view", "parallel_sets"}, {"axes", axes}, {"ribbons", ribbons}, {"n_used", l.n_used},
              {"n_missing", l.n_missing}};
}

namespace {

const mixed::ClusterRun& require_run(const json& p, const stats::EstimatorContext& ctx) {
  const auto id = p.at("run_id").get<std::string>();
  const auto* run = ctx.find_run ? ctx.find_run(id) : nullptr;
  if (!run) throw Error(ErrorCode::not_found, "unknown run '" + id + "'");
  return *run;
}

json axis_json(const AttributeDef& def, const std::vector<double>& values) {
  json a{{"attribute", def.name}, {"kind", to_string(def.kind)}};
  if (def.is_categorical()) {
    a["categories"] = def.categories;
    a["domain"] = {0, def.categories.empty() ? 0 : def.categories.size() - 1};
  } else if (!values.empty()) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    a["domain"] = {*lo, *hi};
    a["unit"] = def.unit;
  } else {
    a["domain"] = nullptr;
  }
  return a;
}

json parallel_coordinates(const json& p, const Cohort& cohort, const std::vector<bool>& selected,
                          const stats::EstimatorContext& ctx) {
  const auto attrs = p.at("attributes").get<std::vector<std::string>>();
  std::vector<const AttributeDef*> defs;
  std::vector<std::pair<double, double>> dom;
  json axes = json::array();
  for (const auto& a : attrs) {
    defs.push_back(&cohort.dictionary.at(a));
    const auto vals = numeric_values(cohort, a);
    axes.push_back(axis_json(*defs.back(), vals));
    if (defs.back()->is_categorical()) {
      dom.emplace_back(0.0, static_cast<double>(std::max<std::size_t>(defs.back()->categories.size(), 1) - 1));
    } else if (vals.empty()) {
      dom.emplace_back(0.0, 0.0);
    } else {
      const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
      dom.emplace_back(*lo, *hi);
    }
  }
  const mixed::ClusterRun* run = p.contains("run_id") ? &require_run(p, ctx) : nullptr;
  json lines = json::array();
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto& s = cohort.subjects[i];
    json pos = json::array(), raw = json::array();
    for (std::size_t k = 0; k < defs.size(); ++k) {
      const auto v = numeric(s.value(attrs[k]));
      raw.push_back(value_to_json(*defs[k], s.value(attrs[k])));
      if (!v) {
        pos.push_back(nullptr);
      } else {
        const double span = dom[k].second - dom[k].first;
        pos.push_back(span > 0.0 ? (*v - dom[k].first) / span : 0.5);
      }
    }
    json line{{"subject_id", s.id}, {"positions", pos}, {"values", raw}, {"selected", static_cast<bool>(selected[i])}};
    if (run) {
      const auto l = run->label_of(s.id);
      line["cluster"] = l ? json(*l) : json(nullptr);
    }
    lines.push_back(line);
  }
  return json{{"view", "parallel_coordinates"}, {"axes", axes}, {"polylines", lines}};
}

json scatterplot(const json& p, const Cohort& cohort, const std::vector<bool>& selected,
                 const stats::EstimatorContext& ctx) {
  const auto xa = p.at("x").get<std::string>(), ya = p.at("y").get<std::string>();
  const auto& xd = cohort.dictionary.at(xa);
  const auto& yd = cohort.dictionary.at(ya);
  const mixed::ClusterRun* run = p.contains("run_id") ? &require_run(p, ctx) : nullptr;
  json pts = json::array();
  std::vector<double> xs, ys;
  std::size_t missing = 0;
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto& s = cohort.subjects[i];
    const auto x = numeric(s.value(xa)), y = numeric(s.value(ya));
    if (!x || !y) {
      ++missing;
      continue;
    }
    xs.push_back(*x);
    ys.push_back(*y);
    json pt{{"subject_id", s.id}, {"x", *x}, {"y", *y}, {"selected", static_cast<bool>(selected[i])}};
    if (run) {
      const auto l = run->label_of(s.id);
      pt["cluster"] = l ? json(*l) : json(nullptr);
    }
    pts.push_back(pt);
  }
  json reg = nullptr;
  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx > 0.0) {
      const double slope = sxy / sxx;
      reg = {{"slope", slope}, {"intercept", my - slope * mx},
             {"r", syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0}};
    }
  }
  return json{{"view", "scatterplot"},     {"x_axis", axis_json(xd, xs)}, {"y_axis", axis_json(yd, ys)},
              {"points", pts},             {"regression", reg},           {"n_used", xs.size()},
              {"n_missing", missing}};
}

json ribbon_view(const json& p, const Cohort& cohort, const stats::EstimatorContext& ctx) {
  const auto& run = require_run(p, ctx);
  if (run.algorithm != mixed::Algorithm::shape_hierarchical) {
    throw Error(ErrorCode::invalid_argument, "ribbon view needs a shape clustering run");
  }
  if (!ctx.centerlines) throw Error(ErrorCode::invalid_argument, "cohort has no centerlines");
  std::vector<shape::Centerline> lines;
  for (const auto& id : run.subject_ids) {
    const auto it = std::find_if(ctx.centerlines->begin(), ctx.centerlines->end(),
                                 [&](const auto& c) { return c.subject_id == id; });
    if (it == ctx.centerlines->end()) throw Error(ErrorCode::not_found, "no centerline for " + id);
    lines.push_back(*it);
  }
  const auto aligned = shape::align_to_mean(lines, run.params.value("alignment_iterations", 2));
  shape::ShapeClustering c;
  c.labels = run.labels;
  c.sizes = run.cluster_sizes;
  for (const auto& rid : run.details.at("representative_ids")) {
    const auto it = std::find(run.subject_ids.begin(), run.subject_ids.end(), rid.get<std::string>());
    c.representatives.push_back(static_cast<std::size_t>(it - run.subject_ids.begin()));
  }
  shape::Plane plane;
  if (p.contains("plane")) {
    const auto& pl = p["plane"];
    const auto pt = pl.at("point").get<std::array<double, 3>>();
    const auto nm = pl.at("normal").get<std::array<double, 3>>();
    plane.point = Vec3(pt[0], pt[1], pt[2]);
    plane.normal = Vec3(nm[0], nm[1], nm[2]);
  }
  shape::RibbonOptions opt;
  opt.min_width = p.value("min_width", opt.min_width);
  opt.max_width = p.value("max_width", opt.max_width);
  json out = shape::ribbon_to_json(shape::ribbon_geometry(c, aligned.aligned, plane, opt));
  out["view"] = "ribbon";
  out["run_hash"] = run.run_hash;
  (void)cohort;
  return out;
}

json km_plot(const json& p, const Cohort& cohort, const std::vector<bool>& selected,
             const stats::EstimatorContext& ctx) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (selected[i]) rows.push_back(i);
  }
  json res = stats::evaluate_estimator("kaplan_meier", p, subset(cohort, rows), ctx).at("result");
  auto steps = [](json& curve) {
    const auto times = curve.at("times").get<std::vector<double>>();
    const auto surv = curve.at("survival").get<std::vector<double>>();
    json pts = json::array({{0.0, 1.0}});
    double prev = 1.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      pts.push_back({times[i], prev});
      pts.push_back({times[i], surv[i]});
      prev = surv[i];
    }
    json marks = json::array();
    for (double t : curve.at("censor_times").get<std::vector<double>>()) {
      const auto it = std::upper_bound(times.begin(), times.end(), t);
      marks.push_back({t, it == times.begin() ? 1.0 : surv[static_cast<std::size_t>(it - times.begin()) - 1]});
    }
    json event_marks = json::array();
    for (std::size_t i = 0; i < times.size(); ++i) event_marks.push_back({times[i], surv[i]});
    curve["step_points"] = pts;
    curve["censor_marks"] = marks;
    curve["event_marks"] = event_marks;
  };
  if (res.contains("curves")) {
    for (auto& c : res["curves"]) steps(c);
  } else {
    steps(res);
  }
  res["view"] = "km_plot";
  return res;
}

json boxplot_tooltip(const json& p, const Cohort& cohort, const stats::EstimatorContext& ctx) {
  const auto& run = require_run(p, ctx);
  const int cluster = p.at("cluster").get<int>();
  const auto prof = mixed::cluster_attribute_profile(run, cohort, p.at("attribute").get<std::string>());
  const json profile = mixed::profile_to_json(prof);
  for (const auto& c : profile.at("clusters")) {
    if (c.at("label").get<int>() == cluster) {
      json out = c;
      out["view"] = "boxplot_tooltip";
      out["attribute"] = prof.attribute;
      return out;
    }
  }
  throw Error(ErrorCode::not_found, "run has no cluster " + std::to_string(cluster));
}

}  // namespace

std::vector<std::string> view_names() {
  return {"boxplot_tooltip", "km_plot", "parallel_coordinates", "parallel_sets", "ribbon", "scatterplot"};
}

json view_model(const std::string& view, const json& params, const Cohort& cohort, const std::vector<bool>& selected,
                const stats::EstimatorContext& ctx) {
  try {
    if (view == "parallel_coordinates") return parallel_coordinates(params, cohort, selected, ctx);
    if (view == "scatterplot") return scatterplot(params, cohort, selected, ctx);
    if (view == "parallel_sets") {
      std::map<std::string, std::vector<double>, std::less<>> bins;
      if (params.contains("bins")) {
        for (auto it = params["bins"].begin(); it != params["bins"].end(); ++it) {
          bins[it.key()] = it.value().get<std::vector<double>>();
        }
      }
      std::optional<Highlight> hl;
      if (params.contains("highlight") && !params["highlight"].is_null()) {
        hl = Highlight{params["highlight"].at("attribute").get<std::string>(),
                       params["highlight"].at("category").get<std::string>()};
      }
      return parallel_sets_to_json(
          parallel_sets_layout(cohort, params.at("attributes").get<std::vector<std::string>>(), bins, hl, selected));
    }
    if (view == "ribbon") return ribbon_view(params, cohort, ctx);
    if (view == "km_plot") return km_plot(params, cohort, selected, ctx);
    if (view == "boxplot_tooltip") return boxplot_tooltip(params, cohort, ctx);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, "view " + view + ": " + e.what());
  }
  throw Error(ErrorCode::invalid_argument, "unknown view '" + view + "'");
}

}  // namespace cohortlab::service
