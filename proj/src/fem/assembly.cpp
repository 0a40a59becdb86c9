#include "cohortlab/fem/assembly.hpp"

#include <cmath>

#include "cohortlab/error.hpp"

namespace cohortlab::fem {

Eigen::MatrixXd constitutive_matrix(int dim, double e, double nu) {
  if (!(nu > -1.0 && nu < 0.5)) throw Error(ErrorCode::invalid_elasticity, "poissons_ratio must lie in (-1, 0.5)");
  const double lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = e / (2.0 * (1.0 + nu));
  if (dim == 2) {
    Eigen::Matrix3d c;
    c << lambda + 2 * mu, lambda, 0,
         lambda, lambda + 2 * mu, 0,
         0, 0, mu;
    return c;
  }
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) c(i, j) = lambda;
    c(i, i) = lambda + 2 * mu;
    c(i + 3, i + 3) = mu;
  }
  return c;
}

double element_measure(int dim, std::span<const Vec3> v) {
  if (dim == 2) {
    const Vec3 a = v[1] - v[0];
    const Vec3 b = v[2] - v[0];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
  }
  return (v[1] - v[0]).dot((v[2] - v[0]).cross(v[3] - v[0])) / 6.0;
}

namespace {

void check_degenerate(int dim, std::span<const Vec3> v, double measure) {
  double max_edge = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) max_edge = std::max(max_edge, (v[i] - v[j]).norm());
  }
  const double scale = std::pow(max_edge, dim);
  if (!(std::abs(measure) > 1e-12 * scale) || scale == 0.0) {
    throw Error(ErrorCode::degenerate_element,
                std::string("degenerate element (zero ") + (dim == 2 ? "area" : "volume") + ")");
  }
}

// Gradients of the linear shape functions, one row per vertex.
Eigen::MatrixXd shape_gradients(int dim, std::span<const Vec3> v) {
  const int n = dim + 1;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    for (int d = 0; d < dim; ++d) a(i, d + 1) = v[static_cast<std::size_t>(i)](d);
  }
  // N_i(x) = c_i . [1, x]; coefficient matrix is inverse(a) with columns per node.
  const Eigen::MatrixXd coeff = a.inverse();
  return coeff.bottomRows(dim).transpose();
}

Eigen::MatrixXd strain_displacement(int dim, const Eigen::MatrixXd& grad) {
  const int n = dim + 1;
  if (dim == 2) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 2 * n);
    for (int i = 0; i < n; ++i) {
      b(0, 2 * i) = grad(i, 0);
      b(1, 2 * i + 1) = grad(i, 1);
      b(2, 2 * i) = grad(i, 1);
      b(2, 2 * i + 1) = grad(i, 0);
    }
    return b;
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(6, 3 * n);
  for (int i = 0; i < n; ++i) {
    const double gx = grad(i, 0), gy = grad(i, 1), gz = grad(i, 2);
    b(0, 3 * i) = gx;
    b(1, 3 * i + 1) = gy;
    b(2, 3 * i + 2) = gz;
    b(3, 3 * i) = gy;
    b(3, 3 * i + 1) = gx;
    b(4, 3 * i + 1) = gz;
    b(4, 3 * i + 2) = gy;
    b(5, 3 * i) = gz;
    b(5, 3 * i + 2) = gx;
  }
  return b;
}

}  // namespace

Eigen::MatrixXd element_stiffness(int dim, std::span<const Vec3> v, const ElasticityParams& material) {
  const double measure = element_measure(dim, v);
  check_degenerate(dim, v, measure);
  const Eigen::MatrixXd b = strain_displacement(dim, shape_gradients(dim, v));
  const Eigen::MatrixXd c = constitutive_matrix(dim, material.youngs_modulus, material.poissons_ratio);
  Eigen::MatrixXd k = std::abs(measure) * b.transpose() * c * b;
  return 0.5 * (k + k.transpose());
}

double element_lumped_mass(int dim, std::span<const Vec3> v, double density) {
  return density * std::abs(element_measure(dim, v)) / static_cast<double>(dim + 1);
}

Eigen::MatrixXd distance_constraint_rows(const ShapeModel& model, int a, int b) {
  const auto& sa = model.subshapes.at(static_cast<std::size_t>(a));
  const auto& sb = model.subshapes.at(static_cast<std::size_t>(b));
  const int dim = model.dim;
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sa.nodes.size() + sb.nodes.size()),
                                               static_cast<Eigen::Index>(model.n_dof()));
  Eigen::Index row = 0;
  // One axial spring from the centroid of `from` to every node of `to`.
  auto add = [&](const Subshape& from, const Subshape& to) {
    Vec3 c = Vec3::Zero();
    for (int n : from.nodes) c += model.nodes[static_cast<std::size_t>(n)];
    c /= static_cast<double>(from.nodes.size());
    for (int j : to.nodes) {
      const Vec3 d = model.nodes[static_cast<std::size_t>(j)] - c;
      if (d.norm() <= 0.0) throw Error(ErrorCode::invalid_argument, "distance constraint node coincides with a centroid");
      const Vec3 e = d.normalized();
      for (int k = 0; k < dim; ++k) {
        rows(row, dim * j + k) += e(k);
        for (int n : from.nodes) rows(row, dim * n + k) -= e(k) / static_cast<double>(from.nodes.size());
      }
      ++row;
    }
  };
  add(sa, sb);
  add(sb, sa);
  return rows / std::sqrt(static_cast<double>(row));
}

namespace {

// Rows of the linear map u -> vec(F_s), F_s = sum_i u_i w_i^T.
Eigen::MatrixXd gradient_rows(const ShapeModel& model, const Subshape& s) {
  const int dim = model.dim;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (int n : s.nodes) mean += model.nodes[static_cast<std::size_t>(n)].head(dim);
  mean /= static_cast<double>(s.nodes.size());
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(dim, dim);
  for (int n : s.nodes) {
    const Eigen::VectorXd r = model.nodes[static_cast<std::size_t>(n)].head(dim) - mean;
    scatter += r * r.transpose();
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(scatter);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::invalid_argument, "co_deformation: subshape '" + s.name + "' nodes do not span the space");
  }
  const Eigen::MatrixXd inv = lu.inverse();
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(dim * dim, static_cast<Eigen::Index>(model.n_dof()));
  for (int n : s.nodes) {
    const Eigen::VectorXd w = inv * (model.nodes[static_cast<std::size_t>(n)].head(dim) - mean);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) rows(r * dim + c, dim * n + r) += w(c);
    }
  }
  return rows;
}

}  // namespace

Eigen::MatrixXd co_deformation_rows(const ShapeModel& model, int a, int b) {
  return gradient_rows(model, model.subshapes.at(static_cast<std::size_t>(a))) -
         gradient_rows(model, model.subshapes.at(static_cast<std::size_t>(b)));
}

FemSystem assemble_system(const ShapeModel& model) {
  model.validate();
  const int dim = model.dim;
  const int npe = model.nodes_per_element();
  const auto n_dof = static_cast<Eigen::Index>(model.n_dof());
  FemSystem sys;
  sys.dim = dim;
  sys.stiffness = Eigen::MatrixXd::Zero(n_dof, n_dof);
  Eigen::VectorXd lumped = Eigen::VectorXd::Zero(n_dof);

  const std::vector<int> owner = model.node_subshape();
  std::array<Vec3, 4> verts;
  for (const auto& el : model.elements) {
    for (int k = 0; k < npe; ++k) verts[static_cast<std::size_t>(k)] = model.nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(k)])];
    const std::span<const Vec3> v(verts.data(), static_cast<std::size_t>(npe));
    const ElasticityParams material = model.material_of_subshape(owner[static_cast<std::size_t>(el[0])]);
    const Eigen::MatrixXd ke = element_stiffness(dim, v, material);
    const double me = element_lumped_mass(dim, v, material.density);
    for (int i = 0; i < npe; ++i) {
      const int gi = el[static_cast<std::size_t>(i)];
      for (int di = 0; di < dim; ++di) {
        lumped(dim * gi + di) += me;
        for (int j = 0; j < npe; ++j) {
          const int gj = el[static_cast<std::size_t>(j)];
          for (int dj = 0; dj < dim; ++dj) {
            sys.stiffness(dim * gi + di, dim * gj + dj) += ke(dim * i + di, dim * j + dj);
          }
        }
      }
    }
  }

  for (const auto& c : model.layer2) {
    if (c.kind == ConnectionKind::distance_constraint) {
      const Eigen::MatrixXd g = distance_constraint_rows(model, c.a, c.b);
      sys.stiffness.noalias() += c.stiffness * g.transpose() * g;
    } else {
      const Eigen::MatrixXd g = co_deformation_rows(model, c.a, c.b);
      sys.stiffness.noalias() += c.stiffness * g.transpose() * g;
    }
  }

  for (Eigen::Index i = 0; i < n_dof; ++i) {
    if (!(lumped(i) > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "node " + std::to_string(i / dim) + " belongs to no element (zero mass)");
    }
  }
  sys.mass = lumped.asDiagonal();
  sys.damping = model.elasticity.damping_alpha * sys.mass + model.elasticity.damping_beta * sys.stiffness;
  return sys;
}

}  // namespace cohortlab::fem
