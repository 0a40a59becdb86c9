#include "cohortlab/fem/forces.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cohortlab/error.hpp"

namespace cohortlab::fem {

std::string_view to_string(Interpolation method) noexcept {
  return method == Interpolation::linear ? "linear" : "cubic";
}

Interpolation parse_interpolation(std::string_view text) {
  if (text == "linear") return Interpolation::linear;
  if (text == "cubic") return Interpolation::cubic;
  throw Error(ErrorCode::invalid_argument, "unknown interpolation '" + std::string(text) + "'");
}

ScalarField::ScalarField(std::vector<double> data, std::array<std::size_t, 3> dims, std::array<double, 3> spacing,
                         Interpolation method)
    : data_(std::move(data)), dims_(dims), spacing_(spacing), method_(method) {
  if (data_.size() != dims_[0] * dims_[1] * dims_[2]) {
    throw Error(ErrorCode::invalid_argument, "scalar field size does not match dims");
  }
}

bool ScalarField::inside(const Vec3& x) const {
  for (int a = 0; a < 3; ++a) {
    const auto n = dims_[static_cast<std::size_t>(a)];
    if (n == 1) continue;
    const double idx = x(a) / spacing_[static_cast<std::size_t>(a)];
    if (!(idx >= 0.0 && idx <= static_cast<double>(n - 1))) return false;
  }
  return true;
}

namespace {

struct Tap {
  std::size_t index = 0;
  double w = 1.0;
  double dw = 0.0;
};

struct AxisTaps {
  std::array<Tap, 4> taps{};
  int count = 1;
};

AxisTaps axis_taps(double idx, std::size_t n, Interpolation method) {
  AxisTaps out;
  if (n == 1) return out;
  const auto cell = std::min(static_cast<std::size_t>(std::floor(idx)), n - 2);
  const double t = idx - static_cast<double>(cell);
  if (method == Interpolation::linear) {
    out.count = 2;
    out.taps[0] = {cell, 1.0 - t, -1.0};
    out.taps[1] = {cell + 1, t, 1.0};
    return out;
  }
  const double t2 = t * t, t3 = t2 * t;
  const std::array<double, 4> w{0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t),
                                0.5 * (t3 - t2)};
  const std::array<double, 4> dw{0.5 * (-3 * t2 + 4 * t - 1), 0.5 * (9 * t2 - 10 * t), 0.5 * (-9 * t2 + 8 * t + 1),
                                 0.5 * (3 * t2 - 2 * t)};
  out.count = 4;
  for (int k = 0; k < 4; ++k) {
    const long i = std::clamp(static_cast<long>(cell) + k - 1, 0L, static_cast<long>(n) - 1);
    out.taps[static_cast<std::size_t>(k)] = {static_cast<std::size_t>(i), w[static_cast<std::size_t>(k)],
                                             dw[static_cast<std::size_t>(k)]};
  }
  return out;
}

}  // namespace

ScalarField::Sample ScalarField::sample(const Vec3& x) const {
  Sample s;
  if (!inside(x)) return s;
  s.inside = true;
  std::array<AxisTaps, 3> ax;
  for (std::size_t a = 0; a < 3; ++a) {
    ax[a] = axis_taps(x(static_cast<Eigen::Index>(a)) / spacing_[a], dims_[a], method_);
  }
  const std::size_t sy = dims_[0], sz = dims_[0] * dims_[1];
  for (int k = 0; k < ax[2].count; ++k) {
    const Tap& tz = ax[2].taps[static_cast<std::size_t>(k)];
    for (int j = 0; j < ax[1].count; ++j) {
      const Tap& ty = ax[1].taps[static_cast<std::size_t>(j)];
      for (int i = 0; i < ax[0].count; ++i) {
        const Tap& tx = ax[0].taps[static_cast<std::size_t>(i)];
        const double v = data_[tx.index + sy * ty.index + sz * tz.index];
        s.value += tx.w * ty.w * tz.w * v;
        s.gradient.x() += tx.dw * ty.w * tz.w * v;
        s.gradient.y() += tx.w * ty.dw * tz.w * v;
        s.gradient.z() += tx.w * ty.w * tz.dw * v;
      }
    }
  }
  for (std::size_t a = 0; a < 3; ++a) s.gradient(static_cast<Eigen::Index>(a)) /= spacing_[a];
  return s;
}

ScalarField ScalarField::gradient_magnitude() const {
  std::vector<double> mag(data_.size(), 0.0);
  const std::array<std::size_t, 3> stride{1, dims_[0], dims_[0] * dims_[1]};
  for (std::size_t k = 0; k < dims_[2]; ++k) {
    for (std::size_t j = 0; j < dims_[1]; ++j) {
      for (std::size_t i = 0; i < dims_[0]; ++i) {
        const std::array<std::size_t, 3> p{i, j, k};
        const std::size_t idx = i + stride[1] * j + stride[2] * k;
        double sq = 0.0;
        for (std::size_t a = 0; a < 3; ++a) {
          if (dims_[a] == 1) continue;
          const std::size_t lo = p[a] > 0 ? p[a] - 1 : p[a];
          const std::size_t hi = p[a] + 1 < dims_[a] ? p[a] + 1 : p[a];
          const double d = (data_[idx - p[a] * stride[a] + hi * stride[a]] - data_[idx - (p[a] - lo) * stride[a]]) /
                           (static_cast<double>(hi - lo) * spacing_[a]);
          sq += d * d;
        }
        mag[idx] = std::sqrt(sq);
      }
    }
  }
  return ScalarField(std::move(mag), dims_, spacing_, method_);
}

ScalarField combined_image(const cohort::ImageVolume& image, const AppearanceParams& appearance,
                           Interpolation method) {
  bool any = false;
  std::vector<double> combined(image.voxel_count(), 0.0);
  for (const auto& [name, weight] : appearance.channel_weights) {
    if (weight == 0.0) continue;
    any = true;
    const auto& ch = image.channel(name);
    for (std::size_t i = 0; i < combined.size(); ++i) combined[i] += weight * static_cast<double>(ch[i]);
  }
  if (!any) throw Error(ErrorCode::invalid_argument, "appearance needs at least one non-zero channel weight");
  combined = cohort::gaussian_blur(combined, image.dims, image.spacing, appearance.smoothing_mm);
  return ScalarField(std::move(combined), image.dims, image.spacing, method);
}

ImageForceModel::ImageForceModel(const ShapeModel& model, const cohort::ImageVolume& image, Interpolation method)
    : dim_(model.dim), node_kind_(model.node_kind) {
  const std::vector<int> owner = model.node_subshape();
  // Subshapes without their own appearance share the model-level one (slot 0).
  std::vector<int> slot_of_subshape(model.subshapes.size(), 0);
  appearances_.push_back(model.appearance);
  for (std::size_t s = 0; s < model.subshapes.size(); ++s) {
    if (model.subshapes[s].appearance) {
      slot_of_subshape[s] = static_cast<int>(appearances_.size());
      appearances_.push_back(*model.subshapes[s].appearance);
    }
  }
  std::vector<bool> used(appearances_.size(), false);
  node_channel_.resize(model.nodes.size());
  for (std::size_t n = 0; n < model.nodes.size(); ++n) {
    node_channel_[n] = owner[n] < 0 ? 0 : slot_of_subshape[static_cast<std::size_t>(owner[n])];
    used[static_cast<std::size_t>(node_channel_[n])] = true;
  }
  channels_.resize(appearances_.size());
  for (std::size_t c = 0; c < appearances_.size(); ++c) {
    channels_[c].appearance = &appearances_[c];
    if (!used[c]) continue;
    const auto& a = appearances_[c];
    if (a.gradient_gain == 0.0 && a.intensity_gain == 0.0) continue;
    channels_[c].intensity = combined_image(image, a, method);
    channels_[c].magnitude = channels_[c].intensity.gradient_magnitude();
  }
}

ForceResult ImageForceModel::compute(std::span<const Vec3> positions) const {
  ForceResult r;
  const auto n = positions.size();
  r.forces = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) * dim_);
  r.outside.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const Channel& ch = channels_[static_cast<std::size_t>(node_channel_[i])];
    const AppearanceParams& a = *ch.appearance;
    Vec3 f = Vec3::Zero();
    if (node_kind_[i] == NodeKind::boundary) {
      if (a.gradient_gain != 0.0) {
        const auto s = ch.magnitude.sample(positions[i]);
        if (!s.inside) {
          r.outside[i] = true;
        } else {
          f = a.gradient_gain * s.gradient;
        }
      }
    } else if (a.intensity_gain != 0.0) {
      const auto s = ch.intensity.sample(positions[i]);
      if (!s.inside) {
        r.outside[i] = true;
      } else {
        f = -2.0 * a.intensity_gain * (s.value - a.expected_intensity) * s.gradient;
      }
    }
    if (r.outside[i]) ++r.n_outside;
    const double norm = f.norm();
    if (norm > a.max_force) f *= a.max_force / norm;
    for (int d = 0; d < dim_; ++d) r.forces(static_cast<Eigen::Index>(i) * dim_ + d) = f(d);
  }
  return r;
}

double ImageForceModel::inner_penalty(std::size_t node, const Vec3& x) const {
  const Channel& ch = channels_[static_cast<std::size_t>(node_channel_.at(node))];
  const auto s = ch.intensity.sample(x);
  const double d = s.value - ch.appearance->expected_intensity;
  return ch.appearance->intensity_gain * d * d;
}

ForceResult image_forces(const ShapeModel& model, std::span<const Vec3> positions, const cohort::ImageVolume& image,
                         Interpolation method) {
  return ImageForceModel(model, image, method).compute(positions);
}

}  // namespace cohortlab::fem
