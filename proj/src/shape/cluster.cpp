#include "cohortlab/shape/cluster.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "cohortlab/error.hpp"

namespace cohortlab::shape {

using nlohmann::json;

double centerline_distance(const Centerline& a, const Centerline& b) {
  if (a.points.size() != b.points.size() || a.points.empty()) {
    throw Error(ErrorCode::invalid_argument, "centerline distance needs equal, non-zero point counts");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.points.size(); ++i) s += (a.points[i] - b.points[i]).norm();
  return s / static_cast<double>(a.points.size());
}

Eigen::MatrixXd distance_matrix(const std::vector<Centerline>& lines) {
  const auto n = static_cast<Eigen::Index>(lines.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = centerline_distance(lines[static_cast<std::size_t>(i)], lines[static_cast<std::size_t>(j)]);
    }
  }
  return d;
}

std::string_view to_string(Linkage l) noexcept {
  switch (l) {
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    case Linkage::average: return "average";
  }
  return "average";
}

Linkage parse_linkage(std::string_view t) {
  if (t == "single") return Linkage::single;
  if (t == "complete") return Linkage::complete;
  if (t == "average") return Linkage::average;
  throw Error(ErrorCode::invalid_argument, "unknown linkage '" + std::string(t) + "'");
}

std::size_t representative(const std::vector<std::size_t>& members, const Eigen::MatrixXd& d) {
  if (members.empty()) throw Error(ErrorCode::invalid_argument, "representative of an empty cluster");
  std::size_t best = members.front();
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i : members) {
    double s = 0.0;
    for (std::size_t j : members) s += d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (s < best_sum || (s == best_sum && i < best)) {
      best_sum = s;
      best = i;
    }
  }
  return best;
}

ShapeClustering agglomerative_cluster(const Eigen::MatrixXd& distances, Linkage linkage, const CutRule& cut) {
  const auto n = static_cast<std::size_t>(distances.rows());
  if (distances.rows() != distances.cols() || n == 0) {
    throw Error(ErrorCode::invalid_argument, "distance matrix must be square and non-empty");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (!(v >= 0.0) || v != distances(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))) {
        throw Error(ErrorCode::invalid_argument, "distance matrix must be symmetric and non-negative");
      }
    }
  }
  if (cut.count && (*cut.count == 0 || *cut.count > n)) {
    throw Error(ErrorCode::invalid_argument, "cut count " + std::to_string(*cut.count) + " outside 1.." + std::to_string(n));
  }
  if (!cut.count && !cut.height) throw Error(ErrorCode::invalid_argument, "cut rule needs a count or a height");

  ShapeClustering out;
  out.linkage = linkage;
  out.cut = cut;
  // Slot i holds the cluster whose smallest member is i.
  Eigen::MatrixXd d = distances;
  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1), id(n);
  for (std::size_t i = 0; i < n; ++i) id[i] = i;
  std::vector<std::size_t> parent(n);  // union-find over leaves for the cut
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    out.merges.push_back({std::min(id[bi], id[bj]), std::max(id[bi], id[bj]), best, size[bi] + size[bj]});
    const bool apply = cut.count ? (n - step > *cut.count) : best <= *cut.height;
    if (apply) parent[find(bj)] = find(bi);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const auto ik = static_cast<Eigen::Index>(k);
      const double a = d(static_cast<Eigen::Index>(bi), ik), b = d(static_cast<Eigen::Index>(bj), ik);
      double v = 0.0;
      switch (linkage) {
        case Linkage::single: v = std::min(a, b); break;
        case Linkage::complete: v = std::max(a, b); break;
        case Linkage::average:
          v = (static_cast<double>(size[bi]) * a + static_cast<double>(size[bj]) * b) /
              static_cast<double>(size[bi] + size[bj]);
          break;
      }
      d(static_cast<Eigen::Index>(bi), ik) = d(ik, static_cast<Eigen::Index>(bi)) = v;
    }
    size[bi] += size[bj];
    active[bj] = false;
    id[bi] = n + step;
  }

  out.labels.assign(n, -1);
  std::map<std::size_t, int> root_label;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    auto it = root_label.find(r);
    if (it == root_label.end()) it = root_label.emplace(r, static_cast<int>(root_label.size())).first;
    out.labels[i] = it->second;
  }
  std::vector<std::vector<std::size_t>> members(root_label.size());
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(out.labels[i])].push_back(i);
  for (const auto& m : members) {
    out.sizes.push_back(m.size());
    out.representatives.push_back(representative(m, distances));
  }
  return out;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::invalid_argument, "label vectors differ in length");
  const auto n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(n);
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

json clustering_to_json(const ShapeClustering& c, const std::vector<std::string>& ids) {
  json merges = json::array();
  for (const auto& m : c.merges) merges.push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}, {"size", m.size}});
  json reps = json::array();
  for (std::size_t k = 0; k < c.representatives.size(); ++k) {
    const auto r = c.representatives[k];
    reps.push_back({{"cluster", k}, {"index", r}, {"subject_id", r < ids.size() ? json(ids[r]) : json(nullptr)}});
  }
  json cut = json::object();
  if (c.cut.count) cut["count"] = *c.cut.count;
  if (c.cut.height) cut["height"] = *c.cut.height;
  return json{{"linkage", std::string(to_string(c.linkage))},
              {"cut", cut},
              {"subject_ids", ids},
              {"labels", c.labels},
              {"sizes", c.sizes},
              {"representatives", reps},
              {"dendrogram", merges}};
}

}  // namespace cohortlab::shape
