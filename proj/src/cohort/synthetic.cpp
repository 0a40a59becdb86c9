#include "cohortlab/cohort/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cohortlab/error.hpp"

namespace cohortlab::cohort {

using nlohmann::json;
constexpr double kPi = std::numbers::pi;

Vec3 SpineAnatomy::canal_point(const Shape& a, double s) const {
  double x = origin_x;
  for (std::size_t k = 0; k < a.size(); ++k) x += a[k] * std::sin(static_cast<double>(k + 1) * kPi * s);
  return {x, origin_y + s * canal_length, 0.0};
}

Vec3 SpineAnatomy::canal_tangent(const Shape& a, double s) const {
  double dx = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double w = static_cast<double>(k + 1) * kPi;
    dx += a[k] * w * std::cos(w * s);
  }
  return Vec3(dx, canal_length, 0.0).normalized();
}

Vec3 SpineAnatomy::anterior_normal(const Shape& a, double s) const {
  const Vec3 t = canal_tangent(a, s);
  return {t.y(), -t.x(), 0.0};
}

std::vector<double> SpineAnatomy::arc_length_parameters(const Shape& a, std::size_t n) const {
  constexpr std::size_t kSamples = 4000;
  std::vector<double> cumulative(kSamples + 1, 0.0);
  Vec3 prev = canal_point(a, 0.0);
  for (std::size_t i = 1; i <= kSamples; ++i) {
    const Vec3 p = canal_point(a, static_cast<double>(i) / kSamples);
    cumulative[i] = cumulative[i - 1] + (p - prev).norm();
    prev = p;
  }
  std::vector<double> out(n);
  const double total = cumulative.back();
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double target = n == 1 ? 0.0 : total * static_cast<double>(i) / static_cast<double>(n - 1);
    while (j + 1 < kSamples && cumulative[j + 1] < target) ++j;
    const double seg = cumulative[j + 1] - cumulative[j];
    const double frac = seg > 0.0 ? std::clamp((target - cumulative[j]) / seg, 0.0, 1.0) : 0.0;
    out[i] = (static_cast<double>(j) + frac) / kSamples;
  }
  return out;
}

std::string_view to_string(NoiseLevel level) noexcept {
  switch (level) {
    case NoiseLevel::low: return "low";
    case NoiseLevel::medium: return "medium";
    case NoiseLevel::high: return "high";
  }
  return "low";
}

NoiseLevel parse_noise_level(std::string_view text) {
  if (text == "low") return NoiseLevel::low;
  if (text == "medium") return NoiseLevel::medium;
  if (text == "high") return NoiseLevel::high;
  throw Error(ErrorCode::invalid_argument, "unknown noise level '" + std::string(text) + "'");
}

double noise_sd(NoiseLevel level) noexcept {
  switch (level) {
    case NoiseLevel::low: return 10.0;
    case NoiseLevel::medium: return 30.0;
    case NoiseLevel::high: return 70.0;
  }
  return 10.0;
}

json spec_to_json(const SyntheticSpec& spec) {
  return json{{"n_subjects", spec.n_subjects},
              {"n_clusters", spec.n_clusters},
              {"noise", to_string(spec.noise)},
              {"female_fraction", spec.female_fraction},
              {"missing_rate", spec.missing_rate},
              {"class_amplitude_mm", spec.class_amplitude_mm},
              {"curvature_loss_per_cm", spec.curvature_loss_per_cm},
              {"class_height_shift_cm", spec.class_height_shift_cm},
              {"shape_jitter_mm", spec.shape_jitter_mm},
              {"pose_jitter_mm", spec.pose_jitter_mm},
              {"pose_jitter_deg", spec.pose_jitter_deg},
              {"render_images", spec.render_images}};
}

SyntheticSpec spec_from_json(const json& j) {
  SyntheticSpec spec;
  spec.n_subjects = j.value("n_subjects", spec.n_subjects);
  spec.n_clusters = j.value("n_clusters", spec.n_clusters);
  spec.noise = parse_noise_level(j.value("noise", std::string(to_string(spec.noise))));
  spec.female_fraction = j.value("female_fraction", spec.female_fraction);
  spec.missing_rate = j.value("missing_rate", spec.missing_rate);
  spec.class_amplitude_mm = j.value("class_amplitude_mm", spec.class_amplitude_mm);
  spec.curvature_loss_per_cm = j.value("curvature_loss_per_cm", spec.curvature_loss_per_cm);
  spec.class_height_shift_cm = j.value("class_height_shift_cm", spec.class_height_shift_cm);
  spec.shape_jitter_mm = j.value("shape_jitter_mm", spec.shape_jitter_mm);
  spec.pose_jitter_mm = j.value("pose_jitter_mm", spec.pose_jitter_mm);
  spec.pose_jitter_deg = j.value("pose_jitter_deg", spec.pose_jitter_deg);
  spec.render_images = j.value("render_images", spec.render_images);
  return spec;
}

bool VertebraTruth::contains(const Vec3& p) const {
  const Vec3 d = p - center;
  return std::abs(d.dot(axis_normal)) <= half_width && std::abs(d.dot(axis_tangent)) <= half_height;
}

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.size() > 2 ? j.at(2).get<double>() : 0.0};
}

}  // namespace

json ground_truth_to_json(const GroundTruth& truth) {
  json subjects = json::array();
  for (const auto& s : truth.subjects) {
    json vertebrae = json::array();
    for (const auto& v : s.vertebrae) {
      vertebrae.push_back({{"center_mm", vec_to_json(v.center)},
                           {"axis_normal", vec_to_json(v.axis_normal)},
                           {"axis_tangent", vec_to_json(v.axis_tangent)},
                           {"half_width_mm", v.half_width},
                           {"half_height_mm", v.half_height}});
    }
    json centerline = json::array();
    for (const auto& p : s.centerline) centerline.push_back(vec_to_json(p));
    subjects.push_back({{"id", s.id},
                        {"cluster", s.cluster},
                        {"shape", s.shape},
                        {"pose_angle_rad", s.pose_angle},
                        {"pose_translation_mm", vec_to_json(s.pose_translation)},
                        {"vertebrae", std::move(vertebrae)},
                        {"centerline_mm", std::move(centerline)}});
  }
  json correlations = json::array();
  for (const auto& c : truth.correlations) {
    correlations.push_back({{"a", c.a}, {"b", c.b}, {"sign", c.sign}});
  }
  return json{{"subjects", std::move(subjects)},
              {"planted_correlations", std::move(correlations)},
              {"class_shapes", truth.class_shapes}};
}

GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth truth;
  try {
    for (const auto& s : j.at("subjects")) {
      SubjectTruth st;
      st.id = s.at("id").get<std::string>();
      st.cluster = s.at("cluster").get<int>();
      st.shape = s.at("shape").get<SpineAnatomy::Shape>();
      st.pose_angle = s.at("pose_angle_rad").get<double>();
      st.pose_translation = vec_from_json(s.at("pose_translation_mm"));
      for (const auto& v : s.at("vertebrae")) {
        VertebraTruth vt;
        vt.center = vec_from_json(v.at("center_mm"));
        vt.axis_normal = vec_from_json(v.at("axis_normal"));
        vt.axis_tangent = vec_from_json(v.at("axis_tangent"));
        vt.half_width = v.at("half_width_mm").get<double>();
        vt.half_height = v.at("half_height_mm").get<double>();
        st.vertebrae.push_back(vt);
      }
      for (const auto& p : s.at("centerline_mm")) st.centerline.push_back(vec_from_json(p));
      truth.subjects.push_back(std::move(st));
    }
    if (j.contains("planted_correlations")) {
      for (const auto& c : j.at("planted_correlations")) {
        truth.correlations.push_back(
            {c.at("a").get<std::string>(), c.at("b").get<std::string>(), c.at("sign").get<int>()});
      }
    }
    if (j.contains("class_shapes")) {
      truth.class_shapes = j.at("class_shapes").get<std::vector<SpineAnatomy::Shape>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("ground truth: ") + e.what());
  }
  return truth;
}

DataDictionary synthetic_dictionary() {
  auto scalar = [](std::string name, std::string unit, double lo, double hi) {
    AttributeDef d;
    d.name = std::move(name);
    d.kind = AttributeKind::scalar;
    d.unit = std::move(unit);
    d.valid_range = ValueRange{lo, hi};
    d.missing_codes = {"NA", "-9"};
    return d;
  };
  auto categorical = [](std::string name, AttributeKind kind, std::vector<std::string> cats) {
    AttributeDef d;
    d.name = std::move(name);
    d.kind = kind;
    d.categories = std::move(cats);
    d.missing_codes = {"NA"};
    return d;
  };
  using K = AttributeKind;
  return DataDictionary({
      categorical("sex", K::nominal, {"female", "male"}),
      scalar("age", "years", 20, 90),
      scalar("height_cm", "cm", 100, 220),
      scalar("weight_kg", "kg", 30, 250),
      categorical("bmi_group", K::ordinal, {"low", "normal", "high", "very_high"}),
      categorical("smoking", K::nominal, {"never", "former", "current"}),
      categorical("physical_activity", K::ordinal, {"low", "moderate", "heavy"}),
      categorical("heavy_lifting", K::nominal, {"no", "yes"}),
      categorical("back_pain_freq", K::ordinal, {"never", "rarely", "often", "daily"}),
      categorical("back_pain_event", K::nominal, {"no", "yes"}),
      categorical("chronic_fatigue", K::nominal, {"no", "yes"}),
      scalar("followup_years", "years", 0, 40),
      categorical("deceased", K::nominal, {"no", "yes"}),
  });
}

SpineAnatomy::Shape class_shape(std::size_t k, std::size_t n_clusters, const SpineAnatomy& anatomy,
                                double amplitude) {
  SpineAnatomy::Shape a{anatomy.mean_lordosis, 0.0, 0.0};
  if (k == 0 || n_clusters <= 1) return a;
  // Height scales shapes radially, so the first classes avoid pure a_1 offsets
  // that would line up with the mean shape.
  static constexpr std::array<std::array<double, 3>, 12> kDirections{{
      {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}, {1, 1, 0}, {-1, -1, 0},
      {1, -1, 0}, {-1, 1, 0}, {0, 1, 1}, {0, -1, -1}, {1, 0, 0}, {-1, 0, 0},
  }};
  const auto& dir = kDirections[(k - 1) % kDirections.size()];
  const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  const double scale = amplitude * (1.0 + static_cast<double>((k - 1) / kDirections.size()));
  for (std::size_t i = 0; i < 3; ++i) a[i] += scale * dir[i] / norm;
  return a;
}

namespace {

struct ModelGeometry {
  std::vector<VertebraTruth> vertebrae;  // model space
  std::vector<VertebraTruth> discs;
};

ModelGeometry model_geometry(const SpineAnatomy& an, const SpineAnatomy::Shape& shape) {
  ModelGeometry g;
  for (int k = 0; k < an.n_vertebrae; ++k) {
    const double s = (k + 0.5) / an.n_vertebrae;
    VertebraTruth v;
    v.axis_tangent = an.canal_tangent(shape, s);
    v.axis_normal = an.anterior_normal(shape, s);
    v.center = an.canal_point(shape, s) + an.vertebra_offset * v.axis_normal;
    v.half_width = an.vertebra_half_width;
    v.half_height = an.vertebra_half_height;
    g.vertebrae.push_back(v);
  }
  for (std::size_t k = 0; k + 1 < g.vertebrae.size(); ++k) {
    const auto& a = g.vertebrae[k];
    const auto& b = g.vertebrae[k + 1];
    VertebraTruth d;
    d.center = 0.5 * (a.center + b.center);
    d.axis_tangent = (b.center - a.center).normalized();
    d.axis_normal = Vec3(d.axis_tangent.y(), -d.axis_tangent.x(), 0.0);
    d.half_width = 0.9 * an.vertebra_half_width;
    d.half_height = 0.5 * (b.center - a.center).norm() - an.vertebra_half_height + 0.5;
    g.discs.push_back(d);
  }
  return g;
}

VertebraTruth transform(const VertebraTruth& v, const Pose& pose) {
  VertebraTruth out = v;
  out.center = pose.apply(v.center);
  out.axis_normal = pose.rotation * v.axis_normal;
  out.axis_tangent = pose.rotation * v.axis_tangent;
  return out;
}

}  // namespace

ImageVolume render_phantom(const SpineAnatomy& an, const SubjectTruth& truth) {
  const ModelGeometry geom = model_geometry(an, truth.shape);
  const Pose pose = truth.pose(an);
  const Mat3 inv_rot = pose.rotation.transpose();

  constexpr std::size_t kCurveSamples = 1200;
  std::vector<Vec3> curve(kCurveSamples + 1);
  for (std::size_t i = 0; i <= kCurveSamples; ++i) {
    curve[i] = an.canal_point(truth.shape, static_cast<double>(i) / kCurveSamples);
  }

  const std::size_t nx = an.image_dims[0];
  const std::size_t ny = an.image_dims[1];
  std::vector<double> t1(nx * ny), t2(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const Vec3 world(static_cast<double>(i) * an.spacing, static_cast<double>(j) * an.spacing, 0.0);
      const Vec3 q = inv_rot * (world - pose.translation);
      const TissueIntensity* tissue = &an.background;
      bool found = false;
      for (const auto& v : geom.vertebrae) {
        if (v.contains(q)) {
          tissue = &an.vertebra;
          found = true;
          break;
        }
      }
      if (!found) {
        for (const auto& d : geom.discs) {
          if (d.contains(q)) {
            tissue = &an.disc;
            found = true;
            break;
          }
        }
      }
      if (!found) {
        const double s0 = (q.y() - an.origin_y) / an.canal_length;
        if (s0 > -0.05 && s0 < 1.05) {
          const long c = std::lround(s0 * kCurveSamples);
          const long lo = std::max(0L, c - 80);
          const long hi = std::min(static_cast<long>(kCurveSamples), c + 80);
          double best = std::numeric_limits<double>::infinity();
          for (long k = lo; k <= hi; ++k) best = std::min(best, (curve[static_cast<std::size_t>(k)] - q).norm());
          if (best <= an.canal_half_width) tissue = &an.canal;
        }
      }
      t1[i + nx * j] = tissue->t1;
      t2[i + nx * j] = tissue->t2;
    }
  }

  ImageVolume img;
  img.dims = {nx, ny, 1};
  img.spacing = {an.spacing, an.spacing, 1.0};
  auto to_float = [&](const std::vector<double>& v) {
    auto blurred = gaussian_blur(v, img.dims, img.spacing, an.edge_blur_mm);
    return std::vector<float>(blurred.begin(), blurred.end());
  };
  img.set_channel("T1", to_float(t1));
  img.set_channel("T2", to_float(t2));
  return img;
}

SyntheticData generate_synthetic_cohort(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n_subjects == 0) throw Error(ErrorCode::invalid_argument, "synthetic spec: n_subjects must be > 0");
  if (spec.n_clusters == 0) throw Error(ErrorCode::invalid_argument, "synthetic spec: n_clusters must be > 0");

  SyntheticData out;
  out.cohort.dictionary = synthetic_dictionary();
  out.cohort.wave = "synthetic-0";
  const auto& an = spec.anatomy;
  for (std::size_t k = 0; k < spec.n_clusters; ++k) {
    out.truth.class_shapes.push_back(class_shape(k, spec.n_clusters, an, spec.class_amplitude_mm));
  }
  // Straighter classes are taller on average: mean height moves linearly with
  // the class rank of the bending proxy sum_k (k^2 a_k)^2.
  std::vector<double> class_height_shift(spec.n_clusters, 0.0);
  if (spec.n_clusters > 1) {
    std::vector<std::pair<double, std::size_t>> bend;
    for (std::size_t k = 0; k < spec.n_clusters; ++k) {
      const auto& a = out.truth.class_shapes[k];
      bend.emplace_back(std::pow(a[0], 2) + std::pow(4.0 * a[1], 2) + std::pow(9.0 * a[2], 2), k);
    }
    std::sort(bend.begin(), bend.end());
    const double last = static_cast<double>(spec.n_clusters - 1);
    for (std::size_t r = 0; r < bend.size(); ++r) {
      class_height_shift[bend[r].second] = spec.class_height_shift_cm * (1.0 - 2.0 * static_cast<double>(r) / last);
    }
  }
  out.truth.correlations = {
      {"height_cm", "weight_kg", +1},
      {"age", "back_pain_freq", +1},
      {"physical_activity", "back_pain_freq", +1},
      {"height_cm", "canal_curvature", -1},
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto bernoulli = [&](double p) { return unif(rng) < p; };
  auto pick = [&](std::initializer_list<double> probs) {
    double u = unif(rng);
    int i = 0;
    for (double p : probs) {
      if (u < p) return i;
      u -= p;
      ++i;
    }
    return i - 1;
  };
  const int pain_class = spec.n_clusters > 1 ? 1 : -1;
  const auto bmi_bounds = std::array<double, 3>{20.0, 25.0, 30.0};

  for (std::size_t i = 0; i < spec.n_subjects; ++i) {
    char id_buf[16];
    std::snprintf(id_buf, sizeof(id_buf), "S%04zu", i + 1);
    SubjectRecord rec;
    rec.id = id_buf;
    SubjectTruth st;
    st.id = rec.id;
    st.cluster = static_cast<int>(i % spec.n_clusters);

    const bool female = bernoulli(spec.female_fraction);
    const double height = std::clamp((female ? 165.0 : 178.0) + 7.0 * normal(rng) +
                                         class_height_shift[static_cast<std::size_t>(st.cluster)],
                                     140.0, 205.0);
    const double age = 30.0 + 50.0 * unif(rng);
    const double bmi = std::exp(std::log(26.0) + 0.16 * normal(rng));
    const double weight = bmi * (height / 100.0) * (height / 100.0);
    const int bmi_group = static_cast<int>(std::upper_bound(bmi_bounds.begin(), bmi_bounds.end(), bmi) -
                                           bmi_bounds.begin());
    const int smoking = pick({0.5, 0.25, 0.25});
    const int activity = pick({0.4, 0.4, 0.2});
    const bool lifting = bernoulli(0.15 + 0.3 * (activity == 2));
    const double pain_latent = 0.04 * (age - 55.0) + 0.6 * activity + (st.cluster == pain_class ? 1.2 : 0.0) +
                               normal(rng);
    const int pain = pain_latent < -0.3 ? 0 : pain_latent < 0.6 ? 1 : pain_latent < 1.5 ? 2 : 3;
    const double event_risk = bmi_group <= 1 ? (lifting ? 0.35 : 0.20) : (lifting ? 0.12 : 0.22);
    const bool pain_event = bernoulli(event_risk);
    const double fatigue_risk = std::clamp(0.08 + 0.0006 * (weight - 75.0) * (weight - 75.0), 0.0, 0.9);
    const bool fatigue = bernoulli(fatigue_risk);
    const double hazard = 0.01 * std::exp(0.06 * (age - 55.0));
    const double t_event = -std::log(1.0 - unif(rng)) / hazard;
    const double t_censor = 5.0 + 10.0 * unif(rng);
    const bool deceased = t_event < t_censor;
    const double followup = std::round(std::min(t_event, t_censor) * 1000.0) / 1000.0;

    rec.values["sex"] = CategoryIndex{female ? 0 : 1};
    rec.values["age"] = std::round(age * 10.0) / 10.0;
    rec.values["height_cm"] = std::round(height * 10.0) / 10.0;
    rec.values["weight_kg"] = std::round(weight * 10.0) / 10.0;
    rec.values["bmi_group"] = OrdinalRank{bmi_group};
    rec.values["smoking"] = CategoryIndex{smoking};
    rec.values["physical_activity"] = OrdinalRank{activity};
    rec.values["heavy_lifting"] = CategoryIndex{lifting ? 1 : 0};
    rec.values["back_pain_freq"] = OrdinalRank{pain};
    rec.values["back_pain_event"] = CategoryIndex{pain_event ? 1 : 0};
    rec.values["chronic_fatigue"] = CategoryIndex{fatigue ? 1 : 0};
    rec.values["followup_years"] = followup;
    rec.values["deceased"] = CategoryIndex{deceased ? 1 : 0};
    for (const char* name : {"weight_kg", "smoking", "physical_activity", "heavy_lifting", "back_pain_freq"}) {
      if (bernoulli(spec.missing_rate)) rec.values[name] = Missing{};
    }

    st.shape = out.truth.class_shapes[static_cast<std::size_t>(st.cluster)];
    const double straighten = std::max(0.0, 1.0 - spec.curvature_loss_per_cm * (height - 170.0));
    for (double& a : st.shape) a *= straighten;
    for (double& a : st.shape) a += spec.shape_jitter_mm * normal(rng);
    st.pose_angle = spec.pose_jitter_deg * std::numbers::pi / 180.0 * normal(rng);
    st.pose_translation = Vec3(spec.pose_jitter_mm * normal(rng), spec.pose_jitter_mm * normal(rng), 0.0);

    const Pose pose = st.pose(an);
    for (const auto& v : model_geometry(an, st.shape).vertebrae) st.vertebrae.push_back(transform(v, pose));
    for (double s : an.arc_length_parameters(st.shape, kCenterlinePoints)) {
      st.centerline.push_back(pose.apply(an.canal_point(st.shape, s)));
    }

    if (spec.render_images) {
      ImageVolume img = render_phantom(an, st);
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(i), 0x9e3779b9u};
      std::mt19937_64 noise_rng(seq);
      std::normal_distribution<double> noise(0.0, noise_sd(spec.noise));
      for (auto& [name, data] : img.channels) {
        for (float& v : data) {
          v = static_cast<float>(std::clamp(std::round(static_cast<double>(v) + noise(noise_rng)), 0.0, 65535.0));
        }
      }
      out.images.push_back(std::move(img));
    }

    out.cohort.subjects.push_back(std::move(rec));
    out.truth.subjects.push_back(std::move(st));
  }
  return out;
}

}  // namespace cohortlab::cohort
