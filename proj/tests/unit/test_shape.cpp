#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "cohortlab/error.hpp"
#include "cohortlab/shape/alignment.hpp"
#include "cohortlab/shape/centerline.hpp"
#include "cohortlab/shape/cluster.hpp"
#include "cohortlab/shape/curvature.hpp"
#include "cohortlab/shape/pca.hpp"
#include "cohortlab/shape/ribbon.hpp"
#include "fixtures.hpp"

using namespace cohortlab;
using namespace cohortlab::shape;

namespace {

Centerline random_curve(std::mt19937_64& rng, std::size_t n, bool planar, std::string id = "S") {
  std::normal_distribution<double> g(0.0, 1.0);
  Centerline c{std::move(id), {}};
  Vec3 p = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    p += Vec3(2.0 + 0.3 * g(rng), 0.5 * g(rng), planar ? 0.0 : 0.5 * g(rng));
    c.points.push_back(p);
  }
  return c;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

// Naive agglomeration recomputing cluster distances from members each step.
std::vector<double> naive_heights(const Eigen::MatrixXd& d, Linkage linkage, std::size_t k, std::vector<int>& labels) {
  const auto n = static_cast<std::size_t>(d.rows());
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});
  std::vector<double> heights;
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i);
  auto dist = [&](const auto& a, const auto& b) {
    double best = linkage == Linkage::single ? 1e300 : 0.0, sum = 0.0;
    for (auto i : a) {
      for (auto j : b) {
        const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        sum += v;
        if (linkage == Linkage::single) best = std::min(best, v);
        if (linkage == Linkage::complete) best = std::max(best, v);
      }
    }
    return linkage == Linkage::average ? sum / static_cast<double>(a.size() * b.size()) : best;
  };
  while (clusters.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = 1e300;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double v = dist(clusters[i], clusters[j]);
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    heights.push_back(best);
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    if (clusters.size() == k) {
      labels.assign(n, -1);
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (auto i : clusters[c]) labels[i] = static_cast<int>(c);
      }
    }
  }
  return heights;
}

}  // namespace

TEST(Alignment, RecoversPlanarRigidMotion) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 10; ++t) {
    const auto ref = random_curve(rng, 40, true);
    const Pose pose = Pose::planar(0.3 * (t - 5), Vec3(10, 3, 0), Vec3(t, -2.0 * t, 0));
    Centerline moved{"M", transform_points(pose, ref.points)};
    const auto r = align_rigid(moved, ref);
    EXPECT_LT(r.residual, 1e-9);
    EXPECT_NEAR(planar_angle(r.transform.rotation), -0.3 * (t - 5), 1e-9);
    for (const auto& p : r.aligned.points) EXPECT_EQ(p.z(), 0.0);
  }
}

TEST(Alignment, RecoversSpatialRotationWithoutReflection) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    const auto ref = random_curve(rng, 30, false);
    const Mat3 r = random_rotation(rng);
    Centerline moved{"M", {}};
    for (const auto& p : ref.points) moved.points.push_back(r * p + Vec3(1, 2, 3));
    const auto a = align_rigid(moved, ref);
    EXPECT_LT(a.residual, 1e-9);
    EXPECT_NEAR(a.transform.rotation.determinant(), 1.0, 1e-12);
    EXPECT_LT((a.transform.rotation - r.transpose()).norm(), 1e-9);
  }
  EXPECT_THROW(align_rigid(random_curve(rng, 5, true), random_curve(rng, 6, true)), Error);
}

TEST(Alignment, AlignedResidualNeverExceedsIdentity) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_curve(rng, 25, t % 2 == 0);
    const auto b = random_curve(rng, 25, t % 2 == 0);
    const auto r = align_rigid(a, b);
    EXPECT_LE(r.residual, r.identity_residual + 1e-12);
  }
}

TEST(Alignment, MeanAlignmentIsOrderInvariant) {
  std::mt19937_64 rng(4);
  std::vector<Centerline> lines;
  for (int i = 0; i < 12; ++i) {
    auto c = random_curve(rng, 20, true, fixtures::subject_id(static_cast<std::size_t>(i)));
    const Pose p = Pose::planar(0.1 * i, Vec3::Zero(), Vec3(i, 0, 0));
    c.points = transform_points(p, c.points);
    lines.push_back(c);
  }
  const auto a = align_to_mean(lines);
  auto shuffled = lines;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto b = align_to_mean(shuffled);
  for (std::size_t i = 0; i < a.mean.points.size(); ++i) EXPECT_LT((a.mean.points[i] - b.mean.points[i]).norm(), 1e-12);
  for (const auto& s : b.aligned) {
    const auto it = std::find_if(a.aligned.begin(), a.aligned.end(), [&](const auto& c) { return c.subject_id == s.subject_id; });
    ASSERT_NE(it, a.aligned.end());
    for (std::size_t i = 0; i < s.points.size(); ++i) EXPECT_LT((it->points[i] - s.points[i]).norm(), 1e-12);
  }
}

TEST(Distance, MeanPointDistance) {
  const Centerline a{"a", {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}};
  const Centerline b{"b", {{0, 3, 0}, {1, 0, 4}, {2, 0, 0}}};
  EXPECT_DOUBLE_EQ(centerline_distance(a, b), (3.0 + 4.0 + 0.0) / 3.0);
  const auto d = distance_matrix({a, b, a});
  EXPECT_EQ(d(0, 2), 0.0);
  EXPECT_EQ(d(1, 0), d(0, 1));
}

TEST(Cluster, MatchesNaiveAgglomerationProperty) {
  for (int seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(50 + seed);
    const auto n = std::uniform_int_distribution<int>(3, 30)(rng);
    std::vector<Vec3> pts(static_cast<std::size_t>(n));
    std::normal_distribution<double> g(0, 1);
    for (auto& p : pts) p = Vec3(g(rng), g(rng), g(rng));
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) d(i, j) = (pts[i] - pts[j]).norm();
    }
    for (Linkage l : {Linkage::single, Linkage::complete, Linkage::average}) {
      const std::size_t k = 1 + static_cast<std::size_t>(seed) % std::min(n, 6);
      std::vector<int> naive_labels(static_cast<std::size_t>(n), 0);
      const auto heights = naive_heights(d, l, k, naive_labels);
      const auto c = agglomerative_cluster(d, l, CutRule::clusters(k));
      ASSERT_EQ(c.merges.size(), heights.size());
      for (std::size_t m = 0; m < heights.size(); ++m) EXPECT_NEAR(c.merges[m].height, heights[m], 1e-12);
      EXPECT_EQ(c.n_clusters(), k);
      EXPECT_NEAR(fixtures::reference_ari(c.labels, naive_labels), 1.0, 1e-12);
      EXPECT_EQ(c.merges.back().size, static_cast<std::size_t>(n));
      for (std::size_t q = 0; q < k; ++q) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < c.labels.size(); ++i) {
          if (c.labels[i] == static_cast<int>(q)) members.push_back(i);
        }
        EXPECT_EQ(c.sizes[q], members.size());
        std::size_t best = members[0];
        double best_sum = 1e300;
        for (auto i : members) {
          double s = 0;
          for (auto j : members) s += d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (s < best_sum) {
            best_sum = s;
            best = i;
          }
        }
        EXPECT_EQ(c.representatives[q], best);
      }
    }
  }
}

TEST(Cluster, LabelsNumberedByFirstMemberAndHeightCut) {
  Eigen::MatrixXd d(4, 4);
  d << 0, 5, 1, 5, 5, 0, 5, 2, 1, 5, 0, 5, 5, 2, 5, 0;
  const auto c = agglomerative_cluster(d, Linkage::average, CutRule::at_height(2.0));
  EXPECT_EQ(c.labels, (std::vector<int>{0, 1, 0, 1}));
  const auto all = agglomerative_cluster(d, Linkage::average, CutRule::at_height(0.5));
  EXPECT_EQ(all.n_clusters(), 4u);
  EXPECT_THROW(agglomerative_cluster(d, Linkage::average, CutRule::clusters(5)), Error);
  EXPECT_EQ(representative({1, 3}, d), 1u);
}

TEST(Cluster, AriMatchesContingencyFormula) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> a(60), b(60);
    for (auto& v : a) v = static_cast<int>(rng() % 4);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng() % 3 == 0 ? static_cast<int>(rng() % 5) : a[i];
    EXPECT_NEAR(adjusted_rand_index(a, b), fixtures::reference_ari(a, b), 1e-12);
  }
  const std::vector<int> x{0, 0, 1, 1, 2, 2};
  const std::vector<int> y{5, 5, 3, 3, 9, 9};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(x, y), 1.0);
}

TEST(Curvature, CircleHasInverseRadius) {
  for (double r : {5.0, 20.0, 80.0}) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 50; ++i) {
      const double a = 0.02 * i;
      pts.emplace_back(r * std::cos(a), r * std::sin(a), 0);
    }
    const auto p = curvature_profile(pts);
    for (double k : p.curvature) EXPECT_NEAR(k, 1.0 / r, 1e-9);
    EXPECT_NEAR(p.arc_length, 49 * 2 * r * std::sin(0.01), 1e-9);
  }
  std::vector<Vec3> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  EXPECT_EQ(curvature_profile(line).max, 0.0);
  EXPECT_THROW(curvature_profile({{0, 0, 0}, {1, 0, 0}}), Error);
}

TEST(Curvature, BinningAndTrendClosedForm) {
  // Three subjects in three bins give df = 1, where the t tail has a closed form.
  const std::vector<std::optional<double>> h{152.0, 163.0, 171.0, std::nullopt, 140.0};
  const std::vector<double> k{0.03, 0.01, 0.02, 0.5, 0.5};
  const auto r = group_curvature_analysis(h, k, BinSpec{150, 10, 0});
  EXPECT_EQ(r.n_used, 3u);
  EXPECT_EQ(r.n_missing, 1u);
  EXPECT_EQ(r.n_out_of_bins, 1u);
  ASSERT_EQ(r.bins.size(), 3u);
  EXPECT_EQ(r.bins[1].lower, 160.0);
  ASSERT_TRUE(r.trend);
  EXPECT_NEAR(r.trend->rho, -0.5, 1e-12);
  const double t = -0.5 * std::sqrt(1.0 / 0.75);
  EXPECT_NEAR(r.trend->p_value, 1.0 - 2.0 / std::numbers::pi * std::atan(std::abs(t)), 1e-10);
  EXPECT_EQ(r.trend->direction, "decreasing");
}

TEST(Curvature, BinConfidenceIntervalBracketsMean) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.02, 0.005);
  std::vector<std::optional<double>> h;
  std::vector<double> k;
  for (int i = 0; i < 200; ++i) {
    h.push_back(150.0 + (i % 40));
    k.push_back(g(rng));
  }
  const auto r = group_curvature_analysis(h, k, BinSpec{150, 10, 4});
  for (const auto& b : r.bins) {
    EXPECT_EQ(b.n, 50u);
    EXPECT_LT(*b.ci_low, *b.mean);
    EXPECT_GT(*b.ci_high, *b.mean);
  }
  EXPECT_GT(r.trend->p_value, 0.001);
}

TEST(Curvature, SpearmanMidRanks) {
  EXPECT_NEAR(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-12);
  EXPECT_NEAR(spearman_rho({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-12);
  // x ranks (1.5, 1.5, 3, 4), y ranks (1, 2, 3, 4): Pearson of the ranks.
  const double rx[4] = {1.5, 1.5, 3, 4}, ry[4] = {1, 2, 3, 4};
  double mx = 2.5, sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - mx);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - mx) * (ry[i] - mx);
  }
  EXPECT_NEAR(spearman_rho({7, 7, 8, 9}, {1, 2, 3, 4}), sxy / std::sqrt(sxx * syy), 1e-12);
}

TEST(Pca, UniformWeightsMatchCovarianceEigenvalues) {
  std::mt19937_64 rng(7);
  std::vector<std::vector<Vec3>> shapes;
  for (int s = 0; s < 15; ++s) shapes.push_back(random_curve(rng, 6, true).points);
  const auto p = weighted_pca(shapes);
  Eigen::MatrixXd x(15, 18);
  for (int s = 0; s < 15; ++s) x.row(s) = flatten(shapes[static_cast<std::size_t>(s)]).transpose();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = (x.rowwise() - mean).transpose() * (x.rowwise() - mean) / 14.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  const Eigen::VectorXd ev = es.eigenvalues().reverse();
  ASSERT_LE(p.variances.size(), 14);
  for (Eigen::Index i = 0; i < p.variances.size(); ++i) EXPECT_NEAR(p.variances(i), ev(i), 1e-9 * ev(0));
  EXPECT_NEAR(p.total_variance(), c.trace(), 1e-9 * c.trace());
  const Eigen::MatrixXd g = p.modes.transpose() * p.modes;
  EXPECT_LT((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).norm(), 1e-9);
  EXPECT_LT(p.project(shapes[0]).norm(), 1e9);
}

TEST(Pca, WeightedModesAreWOrthonormal) {
  std::mt19937_64 rng(8);
  std::vector<std::vector<Vec3>> shapes;
  for (int s = 0; s < 10; ++s) shapes.push_back(random_curve(rng, 5, false).points);
  const std::vector<double> w{1, 2, 0.5, 3, 1};
  const auto p = weighted_pca(shapes, w);
  Eigen::VectorXd wd(15);
  for (int i = 0; i < 5; ++i) wd.segment(3 * i, 3).setConstant(w[static_cast<std::size_t>(i)]);
  const Eigen::MatrixXd g = p.modes.transpose() * wd.asDiagonal() * p.modes;
  EXPECT_LT((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).norm(), 1e-9);
  for (Eigen::Index i = 1; i < p.variances.size(); ++i) EXPECT_LE(p.variances(i), p.variances(i - 1));
  EXPECT_THROW(weighted_pca(shapes, {1, -1, 1, 1, 1}), Error);
  EXPECT_THROW(weighted_pca(std::vector<std::vector<Vec3>>{shapes[0]}), Error);
}

TEST(Ribbon, WidthsColorsAndShadows) {
  std::mt19937_64 rng(10);
  std::vector<Centerline> lines;
  for (int i = 0; i < 9; ++i) lines.push_back(random_curve(rng, 8, false, fixtures::subject_id(static_cast<std::size_t>(i))));
  const auto d = distance_matrix(lines);
  const auto c = agglomerative_cluster(d, Linkage::average, CutRule::clusters(3));
  const Plane plane{Vec3(0, 0, 1), Vec3(0, 0, 2)};
  const auto g = ribbon_geometry(c, lines, plane, {1.0, 5.0});
  ASSERT_EQ(g.ribbons.size(), 3u);
  const auto max_size = *std::max_element(c.sizes.begin(), c.sizes.end());
  for (const auto& r : g.ribbons) {
    EXPECT_DOUBLE_EQ(r.width, 1.0 + 4.0 * static_cast<double>(r.size) / static_cast<double>(max_size));
    EXPECT_EQ(r.subject_id, lines[r.representative].subject_id);
    for (std::size_t i = 0; i < r.polyline.size(); ++i) {
      EXPECT_NEAR(r.color[i], r.polyline[i].z() - 1.0, 1e-12);
      EXPECT_NEAR(r.shadow[i].z(), 1.0, 1e-12);
      EXPECT_NEAR(r.shadow[i].x(), r.polyline[i].x(), 1e-12);
    }
  }
  EXPECT_THROW(ribbon_geometry(c, lines, Plane{Vec3::Zero(), Vec3::Zero()}), Error);
}

TEST(CenterlineIo, CsvRoundTrip) {
  std::mt19937_64 rng(11);
  std::vector<Centerline> lines{random_curve(rng, 93, true, "A"), random_curve(rng, 93, false, "B")};
  const auto back = parse_centerlines(format_centerlines(lines));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(back[k].subject_id, lines[k].subject_id);
    for (std::size_t i = 0; i < 93; ++i) EXPECT_EQ(back[k].points[i], lines[k].points[i]);
  }
  EXPECT_NO_THROW(validate(back[0]));
  Centerline dup{"D", {{0, 0, 0}, {0, 0, 0}, {1, 0, 0}}};
  EXPECT_THROW(validate(dup, 0), Error);
}
