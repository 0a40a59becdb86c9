#pragma once

// Random inputs and brute-force reference implementations shared by the
// unit tests and the acceptance runner. Nothing here calls the code under
// test except for data types.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cohortlab/cohort/types.hpp"
#include "cohortlab/fem/model.hpp"

namespace fixtures {

using cohortlab::Vec3;

inline double signed_measure(int dim, const std::vector<Vec3>& v) {
  if (dim == 2) return 0.5 * ((v[1] - v[0]).x() * (v[2] - v[0]).y() - (v[1] - v[0]).y() * (v[2] - v[0]).x());
  return (v[1] - v[0]).dot((v[2] - v[0]).cross(v[3] - v[0])) / 6.0;
}

/// Jittered structured grid split into positively oriented triangles
/// (2D) or Kuhn tetrahedra (3D), with a random isotropic material.
inline cohortlab::fem::ShapeModel random_mesh(int dim, std::mt19937_64& rng) {
  using cohortlab::fem::ShapeModel;
  std::uniform_int_distribution<int> count(dim == 2 ? 3 : 2, dim == 2 ? 6 : 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int nx = count(rng), ny = count(rng), nz = dim == 3 ? count(rng) : 1;
  const double h = 1.0 + 2.0 * unit(rng);
  ShapeModel m;
  m.dim = dim;
  auto id = [&](int i, int j, int k) { return i + nx * (j + ny * k); };
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        Vec3 p(i * h, j * h, dim == 3 ? k * h : 0.0);
        for (int d = 0; d < dim; ++d) p[d] += 0.2 * h * (unit(rng) - 0.5);
        m.nodes.push_back(p);
      }
    }
  }
  auto add = [&](std::array<int, 4> e) {
    std::vector<Vec3> v;
    for (int q = 0; q <= dim; ++q) v.push_back(m.nodes[static_cast<std::size_t>(e[static_cast<std::size_t>(q)])]);
    if (signed_measure(dim, v) < 0.0) std::swap(e[0], e[1]);
    m.elements.push_back(e);
  };
  if (dim == 2) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        add({id(i, j, 0), id(i + 1, j, 0), id(i + 1, j + 1, 0), 0});
        add({id(i, j, 0), id(i + 1, j + 1, 0), id(i, j + 1, 0), 0});
      }
    }
  } else {
    // Six tetrahedra around the main diagonal of every cell.
    static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int k = 0; k + 1 < nz; ++k) {
      for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
          for (const auto& p : perms) {
            int c[3] = {i, j, k};
            std::array<int, 4> e{};
            e[0] = id(c[0], c[1], c[2]);
            for (int s = 0; s < 3; ++s) {
              ++c[p[s]];
              e[static_cast<std::size_t>(s + 1)] = id(c[0], c[1], c[2]);
            }
            add(e);
          }
        }
      }
    }
  }
  m.node_kind.assign(m.nodes.size(), cohortlab::fem::NodeKind::boundary);
  m.elasticity.youngs_modulus = 1.0 + 999.0 * unit(rng);
  m.elasticity.poissons_ratio = 0.1 + 0.35 * unit(rng);
  m.elasticity.density = 0.5 + 1.5 * unit(rng);
  return m;
}

/// Four-attribute mixed dictionary: two scalars, one ordinal with four ranks
/// and one nominal with three categories.
inline cohortlab::cohort::DataDictionary mixed_dictionary() {
  using namespace cohortlab::cohort;
  AttributeDef s1{"s1", AttributeKind::scalar, {}, "u", std::nullopt, {}};
  AttributeDef s2{"s2", AttributeKind::scalar, {}, "u", std::nullopt, {}};
  AttributeDef o1{"o1", AttributeKind::ordinal, {"r0", "r1", "r2", "r3"}, "", std::nullopt, {}};
  AttributeDef n1{"n1", AttributeKind::nominal, {"a", "b", "c"}, "", std::nullopt, {}};
  return DataDictionary({s1, s2, o1, n1});
}

inline std::string subject_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "P%04zu", i);
  return buf;
}

/// Records drawn from a few loose groups so that DBSCAN finds structure.
inline cohortlab::cohort::Cohort random_mixed_cohort(std::size_t n, std::mt19937_64& rng, double missing_rate) {
  using namespace cohortlab::cohort;
  Cohort c;
  c.dictionary = mixed_dictionary();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int groups = 1 + static_cast<int>(unit(rng) * 4);
  std::vector<std::array<double, 4>> centers;
  for (int g = 0; g < groups; ++g) centers.push_back({unit(rng) * 100, unit(rng) * 10, unit(rng) * 3.99, unit(rng) * 2.99});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ctr = centers[static_cast<std::size_t>(unit(rng) * groups) % centers.size()];
    SubjectRecord r;
    r.id = subject_id(i);
    auto miss = [&] { return unit(rng) < missing_rate; };
    if (!miss()) r.values["s1"] = ctr[0] + 4.0 * noise(rng);
    if (!miss()) r.values["s2"] = std::round((ctr[1] + 0.5 * noise(rng)) * 10.0) / 10.0;
    if (!miss()) r.values["o1"] = OrdinalRank{std::clamp(static_cast<int>(ctr[2] + 0.6 * noise(rng)), 0, 3)};
    if (!miss()) r.values["n1"] = CategoryIndex{unit(rng) < 0.8 ? static_cast<int>(ctr[3]) : static_cast<int>(unit(rng) * 2.99)};
    c.subjects.push_back(std::move(r));
  }
  return c;
}

/// Weighted mean of per-attribute distances over attributes present in both
/// records: nominal 0/1, ordinal |dr|/(k-1), scalar |dx|/range clipped to 1.
/// Ranges come from `records`. Returns nullopt when no attribute is shared.
class ReferenceGower {
 public:
  ReferenceGower(const cohortlab::cohort::DataDictionary& dict, std::vector<std::string> attrs,
                 const std::vector<cohortlab::cohort::SubjectRecord>& records)
      : dict_(dict), attrs_(std::move(attrs)) {
    for (const auto& a : attrs_) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& r : records) {
        const auto it = r.values.find(a);
        if (it != r.values.end() && std::holds_alternative<double>(it->second)) {
          lo = std::min(lo, std::get<double>(it->second));
          hi = std::max(hi, std::get<double>(it->second));
        }
      }
      range_[a] = hi > lo ? hi - lo : 0.0;
    }
  }

  std::optional<double> operator()(const cohortlab::cohort::SubjectRecord& x,
                                   const cohortlab::cohort::SubjectRecord& y) const {
    using namespace cohortlab::cohort;
    if (x.id == y.id) return 0.0;
    double num = 0.0;
    int den = 0;
    for (const auto& a : attrs_) {
      const auto ix = x.values.find(a), iy = y.values.find(a);
      if (ix == x.values.end() || iy == y.values.end()) continue;
      if (is_missing(ix->second) || is_missing(iy->second)) continue;
      const auto& def = dict_.at(a);
      double d = 0.0;
      if (def.kind == AttributeKind::nominal) {
        d = std::get<CategoryIndex>(ix->second).index == std::get<CategoryIndex>(iy->second).index ? 0.0 : 1.0;
      } else if (def.kind == AttributeKind::ordinal) {
        d = std::abs(std::get<OrdinalRank>(ix->second).rank - std::get<OrdinalRank>(iy->second).rank) /
            static_cast<double>(def.categories.size() - 1);
      } else {
        const double dx = std::abs(std::get<double>(ix->second) - std::get<double>(iy->second));
        const double rg = range_.at(a);
        d = dx == 0.0 ? 0.0 : (rg > 0.0 ? std::min(1.0, dx / rg) : 1.0);
      }
      num += d;
      ++den;
    }
    if (den == 0) return std::nullopt;
    return num / den;
  }

 private:
  const cohortlab::cohort::DataDictionary& dict_;
  std::vector<std::string> attrs_;
  std::map<std::string, double> range_;
};

/// Textbook DBSCAN written from the definitions: core points have at least
/// min_points neighbours within eps (self included); clusters are connected
/// components of the core graph, numbered by smallest core index; a border
/// point joins the cluster of its lowest-index core neighbour.
inline std::vector<int> reference_dbscan(const Eigen::MatrixXd& d, double eps, std::size_t min_points) {
  const auto n = static_cast<std::size_t>(d.rows());
  auto near = [&](std::size_t i, std::size_t j) { return i == j || d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= eps; };
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) c += near(i, j);
    core[i] = c >= min_points;
  }
  // Union-find over core-core edges.
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (core[i] && core[j] && near(i, j)) {
        const auto a = find(i), b = find(j);
        parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::vector<int> labels(n, -1);
  std::map<std::size_t, int> cluster_of_root;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const auto r = find(i);
    const auto it = cluster_of_root.find(r);
    if (it == cluster_of_root.end()) {
      const int next = static_cast<int>(cluster_of_root.size());
      cluster_of_root[r] = next;
    }
  }
  // Renumber by smallest member index: roots are the smallest index thanks to min-union.
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) labels[i] = cluster_of_root.at(find(i));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (core[j] && near(i, j)) {
        labels[i] = labels[j];
        break;
      }
    }
  }
  return labels;
}

/// Adjusted Rand index from the contingency table (Hubert and Arabie).
inline double reference_ari(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double sj = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : joint) sj += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double total = c2(static_cast<double>(a.size()));
  const double expected = sa * sb / total;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (sj - expected) / (max_index - expected);
}

/// Cohort of nominal attributes with uniform random categories; each cell is
/// missing with probability `missing_rate`.
inline cohortlab::cohort::Cohort random_categorical_cohort(std::size_t n, std::size_t n_attrs, std::mt19937_64& rng,
                                                           double missing_rate) {
  using namespace cohortlab::cohort;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<AttributeDef> defs;
  for (std::size_t a = 0; a < n_attrs; ++a) {
    AttributeDef d;
    d.name = "c" + std::to_string(a);
    d.kind = unit(rng) < 0.5 ? AttributeKind::nominal : AttributeKind::ordinal;
    const auto k = 2 + static_cast<std::size_t>(unit(rng) * 4);
    for (std::size_t j = 0; j < k; ++j) d.categories.push_back("k" + std::to_string(j));
    defs.push_back(d);
  }
  Cohort c;
  c.dictionary = DataDictionary(defs);
  for (std::size_t i = 0; i < n; ++i) {
    SubjectRecord r;
    r.id = subject_id(i);
    for (const auto& d : defs) {
      if (unit(rng) < missing_rate) continue;
      const int k = static_cast<int>(unit(rng) * static_cast<double>(d.categories.size())) % static_cast<int>(d.categories.size());
      if (d.kind == AttributeKind::nominal) {
        r.values[d.name] = CategoryIndex{k};
      } else {
        r.values[d.name] = OrdinalRank{k};
      }
    }
    c.subjects.push_back(std::move(r));
  }
  return c;
}

}  // namespace fixtures
