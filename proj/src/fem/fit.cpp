#include "cohortlab/fem/fit.hpp"

#include <chrono>
#include <cmath>

#include "cohortlab/error.hpp"

namespace cohortlab::fem {

using nlohmann::json;

PreparedModel prepare_model(const ShapeModel& model) {
  model.validate();
  PreparedModel p;
  p.model = model;
  p.system = assemble_system(model);
  p.basis = modal_decomposition(p.system);
  return p;
}

FitResult fit(const ShapeModel& model, const cohort::ImageVolume& image, const Pose& init_pose,
              const FitOptions& options) {
  return fit(prepare_model(model), image, init_pose, options);
}

FitResult fit(const PreparedModel& prepared, const cohort::ImageVolume& image, const Pose& init_pose,
              const FitOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const ShapeModel& model = prepared.model;
  const ModalBasis& basis = prepared.basis;
  const int dim = model.dim;
  const auto n_nodes = model.nodes.size();
  const Eigen::Index n_modes = truncation_count(basis, options.mode_fraction);
  const Eigen::MatrixXd e = basis.eigenvectors.leftCols(n_modes);
  const Eigen::MatrixXd et = e.transpose();
  const Eigen::VectorXd lambda = basis.eigenvalues.head(n_modes).cwiseMax(0.0);
  const double alpha = model.elasticity.damping_alpha;
  const double beta = model.elasticity.damping_beta;

  FitResult r;
  r.modes_used = static_cast<std::size_t>(n_modes);
  const double lambda_max = basis.eigenvalues.maxCoeff();
  r.dt = options.dt > 0.0 ? options.dt : (lambda_max > 0.0 ? options.dt_factor / std::sqrt(lambda_max) : 1.0);
  const double dt = r.dt;
  const Eigen::ArrayXd c = alpha + beta * lambda.array();
  const Eigen::ArrayXd denom = 1.0 + dt * c + dt * dt * lambda.array();

  double min_spacing = image.spacing[0];
  for (int a = 1; a < dim; ++a) min_spacing = std::min(min_spacing, image.spacing[static_cast<std::size_t>(a)]);
  const double threshold = options.convergence_voxels * min_spacing;

  const ImageForceModel forces(model, image, options.interpolation);
  const Mat3 pull_back = init_pose.scale * init_pose.rotation.transpose();

  Eigen::VectorXd q = Eigen::VectorXd::Zero(n_modes);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n_modes);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.n_dof()));
  std::vector<Vec3> positions(n_nodes);
  auto place = [&](const Eigen::VectorXd& disp) {
    for (std::size_t i = 0; i < n_nodes; ++i) {
      Vec3 x = model.nodes[i];
      for (int d = 0; d < dim; ++d) x(d) += disp(static_cast<Eigen::Index>(i) * dim + d);
      positions[i] = init_pose.apply(x);
    }
  };
  place(u);

  Eigen::VectorXd f_model(u.size());
  int quiet = 0;
  while (r.steps < options.max_steps) {
    const ForceResult f = forces.compute(positions);
    r.n_outside = f.n_outside;
    for (std::size_t i = 0; i < n_nodes; ++i) {
      Vec3 fi = Vec3::Zero();
      for (int d = 0; d < dim; ++d) fi(d) = f.forces(static_cast<Eigen::Index>(i) * dim + d);
      const Vec3 fm = pull_back * fi;
      for (int d = 0; d < dim; ++d) f_model(static_cast<Eigen::Index>(i) * dim + d) = fm(d);
    }
    const Eigen::VectorXd phi = et * f_model;
    v = ((v + dt * (phi - lambda.cwiseProduct(q))).array() / denom).matrix();
    q += dt * v;
    const Eigen::VectorXd u_new = e * q;

    double max_step = 0.0;
    for (std::size_t i = 0; i < n_nodes; ++i) {
      double sq = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double s = u_new(static_cast<Eigen::Index>(i) * dim + d) - u(static_cast<Eigen::Index>(i) * dim + d);
        sq += s * s;
      }
      max_step = std::max(max_step, std::sqrt(sq));
    }
    max_step *= init_pose.scale;
    u = u_new;
    place(u);
    ++r.steps;
    r.last_step_voxels = max_step / min_spacing;
    if (options.record_trajectory) r.trajectory.emplace_back(q.data(), q.data() + q.size());
    quiet = max_step < threshold ? quiet + 1 : 0;
    if (quiet >= options.convergence_steps) {
      r.converged = true;
      break;
    }
  }

  r.final_positions = positions;
  r.displacement = u;
  r.quality = quality_of_fit(prepared.system, basis, u);
  r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

QualityOfFit quality_of_fit(const FemSystem& system, const ModalBasis& basis, const Eigen::VectorXd& displacement,
                            double scale_mm) {
  QualityOfFit q;
  const Eigen::VectorXd a = basis.eigenvectors.transpose() * (system.mass * displacement);
  q.modal_amplitude.assign(a.data(), a.data() + a.size());
  const auto rigid = static_cast<Eigen::Index>(basis.n_rigid);
  const Eigen::Index n = a.size();
  const Eigen::Index major_end = rigid < n ? truncation_count(basis, 0.9) : n;
  q.n_major = static_cast<std::size_t>(major_end - rigid);
  const double m_total = system.mass.diagonal().sum() / system.dim;
  double penalty = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double energy = a(i) * a(i);
    q.total += energy;
    if (i < rigid) {
      q.rigid_part += energy;
    } else {
      if (i < major_end) {
        q.major_part += energy;
      } else {
        q.minor_part += energy;
      }
      penalty += basis.eigenvalues(i) / basis.eigenvalues(rigid) * energy;
    }
  }
  q.score = std::exp(-penalty / (m_total * scale_mm * scale_mm));
  return q;
}

bool DetectionResult::all_successful() const {
  if (!success) return false;
  for (bool s : *success) {
    if (!s) return false;
  }
  return true;
}

DetectionResult detect_vertebrae(const ShapeModel& model, const std::vector<Vec3>& fitted_positions,
                                 const std::vector<cohort::VertebraTruth>* truth) {
  if (fitted_positions.size() != model.nodes.size()) {
    throw Error(ErrorCode::invalid_argument, "fitted positions do not match the model node count");
  }
  DetectionResult d;
  for (const auto& s : model.subshapes) {
    if (s.role != "vertebra" || s.nodes.empty()) continue;
    Vec3 c = Vec3::Zero();
    for (int n : s.nodes) c += fitted_positions[static_cast<std::size_t>(n)];
    d.names.push_back(s.name);
    d.centers.push_back(c / static_cast<double>(s.nodes.size()));
  }
  if (truth) {
    std::vector<bool> ok(d.centers.size(), false);
    for (std::size_t k = 0; k < d.centers.size() && k < truth->size(); ++k) ok[k] = (*truth)[k].contains(d.centers[k]);
    d.success = std::move(ok);
  }
  return d;
}

json quality_to_json(const QualityOfFit& q) {
  return json{{"modal_amplitude", q.modal_amplitude}, {"rigid_part", q.rigid_part}, {"major_part", q.major_part},
              {"minor_part", q.minor_part},           {"total", q.total},           {"n_major", q.n_major},
              {"score", q.score}};
}

json fit_to_json(const FitResult& r, bool include_trace) {
  json pos = json::array();
  for (const auto& p : r.final_positions) pos.push_back({p.x(), p.y(), p.z()});
  json j{{"final_positions", pos},
         {"converged", r.converged},
         {"steps", r.steps},
         {"dt", r.dt},
         {"last_step_voxels", r.last_step_voxels},
         {"modes_used", r.modes_used},
         {"n_outside", r.n_outside},
         {"quality", quality_to_json(r.quality)},
         {"elapsed_seconds", r.elapsed_seconds}};
  if (include_trace) j["trajectory"] = r.trajectory;
  return j;
}

json detection_to_json(const DetectionResult& d) {
  json out = json::array();
  for (std::size_t k = 0; k < d.centers.size(); ++k) {
    json e{{"name", d.names[k]}, {"center", {d.centers[k].x(), d.centers[k].y(), d.centers[k].z()}}};
    if (d.success) e["success"] = static_cast<bool>((*d.success)[k]);
    out.push_back(e);
  }
  return out;
}

}  // namespace cohortlab::fem
