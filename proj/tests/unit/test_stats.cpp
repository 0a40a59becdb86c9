#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "cohortlab/cohort/io.hpp"
#include "cohortlab/error.hpp"
#include "cohortlab/stats/pca.hpp"
#include "cohortlab/stats/proportion.hpp"
#include "cohortlab/stats/registry.hpp"
#include "cohortlab/stats/risk.hpp"
#include "cohortlab/stats/survival.hpp"
#include "cohortlab/stats/tests.hpp"
#include "cohortlab/stats/ushape.hpp"
#include "fixtures.hpp"

using namespace cohortlab;
using namespace cohortlab::stats;
using nlohmann::json;

namespace {

constexpr double kZ95 = 1.959963984540054;

// Upper tails with closed forms: chi-square with 1 and 2 df, standard normal.
double chi2_1_sf(double x) { return std::erfc(std::sqrt(x / 2.0)); }
double chi2_2_sf(double x) { return std::exp(-x / 2.0); }
double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

cohort::Cohort exposure_cohort() {
  const auto dict = cohort::parse_dictionary(json::parse(R"({"attributes": [
    {"name": "lifting", "kind": "nominal", "categories": ["no", "yes"]},
    {"name": "pain", "kind": "nominal", "categories": ["no", "yes"]},
    {"name": "sex", "kind": "nominal", "categories": ["female", "male"]},
    {"name": "age", "kind": "scalar"},
    {"name": "followup", "kind": "scalar"},
    {"name": "event", "kind": "nominal", "categories": ["no", "yes"]}
  ]})"));
  std::string csv = "id,lifting,pain,sex,age,followup,event\n";
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 400; ++i) {
    const bool lift = u(rng) < 0.4;
    const bool male = u(rng) < 0.5;
    const bool pain = u(rng) < (lift ? 0.3 : 0.1) * (male ? 1.5 : 1.0);
    csv += "S" + std::to_string(i) + "," + (lift ? "yes" : "no") + "," + (i % 50 == 0 ? "" : (pain ? "yes" : "no")) +
           "," + (male ? "male" : "female") + "," + std::to_string(20 + (i * 7) % 60) + "," +
           std::to_string(1 + (i * 13) % 10) + "," + (u(rng) < 0.3 ? "yes" : "no") + "\n";
  }
  return cohort::parse_cohort(csv, dict).cohort;
}

std::vector<cohort::SelectionPredicate> is_yes(const std::string& attr) {
  cohort::SelectionPredicate p{attr, cohort::PredicateOp::in_categories};
  p.categories = {"yes"};
  return {p};
}

}  // namespace

TEST(Proportion, WilsonMatchesDirectFormula) {
  for (std::size_t n : {1u, 7u, 50u, 243u}) {
    for (std::size_t k = 0; k <= n; k += std::max<std::size_t>(1, n / 7)) {
      for (double conf : {0.9, 0.95, 0.99}) {
        const double z = z_quantile(conf);
        const double p = static_cast<double>(k) / n, nn = static_cast<double>(n);
        const double c = (p + z * z / (2 * nn)) / (1 + z * z / nn);
        const double h = z / (1 + z * z / nn) * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn));
        const auto w = wilson_interval(k, n, conf);
        EXPECT_NEAR(w.low, c - h, 1e-12);
        EXPECT_NEAR(w.high, c + h, 1e-12);
        EXPECT_GE(w.low, 0.0);
        EXPECT_LE(w.high, 1.0 + 1e-15);
      }
    }
  }
  EXPECT_NEAR(z_quantile(0.95), kZ95, 1e-12);
  EXPECT_THROW(z_quantile(1.0), Error);
  EXPECT_THROW(proportion(0, 0), Error);
}

TEST(Proportion, PrevalenceCountsMissing) {
  const auto c = exposure_cohort();
  const auto p = prevalence(c, is_yes("pain"));
  EXPECT_EQ(p.n_missing, 8u);
  EXPECT_EQ(p.n_used, 392u);
  std::size_t k = 0;
  for (const auto& s : c.subjects) k += cohort::numeric(s.value("pain")) == 1.0;
  EXPECT_EQ(p.k, k);
}

TEST(Incidence, PoissonLimitsClosedForms) {
  // chi-square with 2 df has quantile -2 ln(1 - p), which covers k = 0 and the lower limit for k = 1.
  const auto zero = incidence(0, 250.0);
  EXPECT_EQ(zero.ci.low, 0.0);
  EXPECT_NEAR(zero.ci.high, -std::log(0.05) / 250.0, 1e-12);
  const auto one = incidence(1, 10.0);
  EXPECT_NEAR(one.ci.low, -std::log(1 - 0.025) / 10.0, 1e-12);
  EXPECT_NEAR(one.rate, 0.1, 1e-15);
  EXPECT_LT(one.ci.high, 0.6);
  EXPECT_GT(one.ci.high, 0.5);
  const auto f = incidence(std::vector<FollowUp>{{0, 2, true}, {1, 4, false}, {0.5, 1, true}});
  EXPECT_DOUBLE_EQ(f.person_time, 5.5);
  EXPECT_EQ(f.events, 2u);
  EXPECT_THROW(incidence(3, 0.0), Error);
  EXPECT_THROW(incidence(std::vector<FollowUp>{{2, 1, false}}), Error);
}

TEST(Risk, RelativeRiskAndLogInterval) {
  const auto r = relative_risk({30, 70, 10, 90});
  EXPECT_DOUBLE_EQ(r.rr, 3.0);
  const double se = std::sqrt(1.0 / 30 - 1.0 / 100 + 1.0 / 10 - 1.0 / 100);
  EXPECT_NEAR(r.log_se, se, 1e-15);
  EXPECT_NEAR(r.ci.low, 3.0 * std::exp(-kZ95 * se), 1e-10);
  EXPECT_NEAR(r.ci.high, 3.0 * std::exp(kZ95 * se), 1e-10);
  EXPECT_NEAR(r.p_value, chi2_1_sf(r.chi_square), 1e-12);
  EXPECT_EQ(r.classification, "risk");
  EXPECT_EQ(relative_risk(RiskTable{30, 70, 10, 90}.swapped()).classification, "protective");
  EXPECT_NEAR(relative_risk(RiskTable{30, 70, 10, 90}.swapped()).rr, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(relative_risk({10, 10, 10, 10}).classification, "neutral");
  for (const RiskTable t : {RiskTable{0, 10, 5, 5}, RiskTable{5, 5, 0, 10}, RiskTable{0, 0, 3, 3}}) {
    try {
      relative_risk(t);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::zero_margin);
    }
  }
}

TEST(Risk, ChiSquareMatchesExpectedCounts) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> cell(0, 60);
  for (int t = 0; t < 100; ++t) {
    const RiskTable tab{cell(rng), cell(rng), cell(rng), cell(rng)};
    const double o[4] = {double(tab.a), double(tab.b), double(tab.c), double(tab.d)};
    const double n = o[0] + o[1] + o[2] + o[3];
    const double rows[2] = {o[0] + o[1], o[2] + o[3]}, cols[2] = {o[0] + o[2], o[1] + o[3]};
    double chi = 0;
    bool empty = false;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double e = rows[i] * cols[j] / n;
        if (e == 0) empty = true;
        else chi += (o[2 * i + j] - e) * (o[2 * i + j] - e) / e;
      }
    }
    EXPECT_NEAR(pearson_chi_square(tab), empty ? 0.0 : chi, 1e-10 * std::max(1.0, chi));
  }
}

TEST(Risk, CohortTableAndStratifiedWoolf) {
  const auto c = exposure_cohort();
  const auto t = risk_table(c, is_yes("lifting"), is_yes("pain"));
  EXPECT_EQ(t.n_missing, 8u);
  EXPECT_EQ(t.table.total(), t.n_used);
  std::size_t a = 0;
  for (const auto& s : c.subjects) a += cohort::numeric(s.value("lifting")) == 1.0 && cohort::numeric(s.value("pain")) == 1.0;
  EXPECT_EQ(t.table.a, a);

  const auto r = interaction_terms(c, is_yes("pain"), is_yes("lifting"), "sex");
  ASSERT_EQ(r.strata.size(), 2u);
  ASSERT_TRUE(r.heterogeneity);
  const auto& e1 = *r.strata[0].estimate;
  const auto& e2 = *r.strata[1].estimate;
  const double w1 = 1 / (e1.log_se * e1.log_se), w2 = 1 / (e2.log_se * e2.log_se);
  const double l1 = std::log(e1.rr), l2 = std::log(e2.rr);
  const double q = w1 * w2 / (w1 + w2) * (l1 - l2) * (l1 - l2);
  EXPECT_NEAR(r.heterogeneity->q, q, 1e-12);
  EXPECT_NEAR(r.heterogeneity->pooled_rr, std::exp((w1 * l1 + w2 * l2) / (w1 + w2)), 1e-12);
  EXPECT_NEAR(r.heterogeneity->p_value, chi2_1_sf(q), 1e-12);

  const auto binned = interaction_terms(c, is_yes("pain"), is_yes("lifting"), "age", {20, 40, 60, 80});
  EXPECT_EQ(binned.strata.size(), 3u);
  std::size_t used = 0;
  for (const auto& s : binned.strata) used += s.table.total();
  EXPECT_EQ(used, binned.n_used);
}

TEST(Survival, AllEventsGiveStepCurve) {
  const auto km = kaplan_meier({{1, true}, {2, true}, {3, true}});
  ASSERT_EQ(km.survival.size(), 3u);
  EXPECT_DOUBLE_EQ(km.survival[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(km.survival[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(km.survival[2], 0.0);
  EXPECT_EQ(km.at(0.5), 1.0);
  EXPECT_DOUBLE_EQ(km.at(1.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(km.at(2.5), 1.0 / 3.0);
  EXPECT_FALSE(km.log_se[2]);
}

TEST(Survival, CensoringAndGreenwoodBand) {
  const auto km = kaplan_meier({{1, true}, {2, false}, {3, true}, {4, true}, {5, false}, {3, false}});
  // n = 6: t=1 (6 at risk, 1 event), t=3 (4 at risk, 1 event; a tie censored at 3 stays at risk), t=4 (2, 1).
  ASSERT_EQ(km.times, (std::vector<double>{1, 3, 4}));
  EXPECT_EQ(km.at_risk, (std::vector<std::size_t>{6, 4, 2}));
  const double s[3] = {5.0 / 6, 5.0 / 6 * 3 / 4, 5.0 / 6 * 3 / 4 * 1 / 2};
  const double g[3] = {1.0 / (6 * 5), 1.0 / (6 * 5) + 1.0 / (4 * 3), 1.0 / (6 * 5) + 1.0 / (4 * 3) + 1.0 / (2 * 1)};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(km.survival[i], s[i], 1e-15);
    EXPECT_NEAR(*km.log_se[i], std::sqrt(g[i]), 1e-12);
    EXPECT_NEAR(km.ci_low[i], s[i] * std::exp(-kZ95 * std::sqrt(g[i])), 1e-12);
    EXPECT_NEAR(km.ci_high[i], std::min(1.0, s[i] * std::exp(kZ95 * std::sqrt(g[i]))), 1e-12);
  }
  EXPECT_EQ(km.censor_times, (std::vector<double>{2, 3, 5}));
  EXPECT_THROW(kaplan_meier({}), Error);
  EXPECT_THROW(kaplan_meier({{-1, true}}), Error);
}

TEST(Survival, MonotoneProperty) {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> ex(0.2);
  for (int t = 0; t < 20; ++t) {
    std::vector<SurvivalRecord> r;
    for (int i = 0; i < 80; ++i) r.push_back({std::round(ex(rng) * 4) / 4, rng() % 3 != 0});
    const auto km = kaplan_meier(r);
    for (std::size_t i = 0; i < km.survival.size(); ++i) {
      if (i) EXPECT_LE(km.survival[i], km.survival[i - 1]);
      EXPECT_LE(km.ci_low[i], km.survival[i]);
      EXPECT_GE(km.ci_high[i], km.survival[i]);
    }
    std::size_t events = 0;
    for (auto e : km.events) events += e;
    EXPECT_EQ(events + km.censor_times.size(), r.size());
  }
}

TEST(RankTests, MannWhitneyDirectFormula) {
  const std::vector<double> x{1.5, 3, 3, 7, 9, 11, 2};
  const std::vector<double> y{3, 4, 5, 5, 6, 1, 0.5, 8};
  double u1 = 0;
  for (double a : x) {
    for (double b : y) u1 += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  // Ties: value 3 appears three times, value 5 twice.
  const double n1 = 7, n2 = 8, n = 15;
  const double ties = (27 - 3) + (8 - 2);
  const double var = n1 * n2 / 12 * ((n + 1) - ties / (n * (n - 1)));
  const double z = (u1 - n1 * n2 / 2) / std::sqrt(var);
  const auto r = mann_whitney(x, y);
  EXPECT_DOUBLE_EQ(r.statistic, u1);
  EXPECT_NEAR(r.z, z, 1e-12);
  EXPECT_NEAR(r.p_value, normal_two_sided(z), 1e-12);
  EXPECT_NEAR(r.effect_size, 2 * u1 / (n1 * n2) - 1, 1e-12);
}

TEST(RankTests, KruskalWallisThreeGroups) {
  const std::vector<std::vector<double>> g{{1, 2, 3.5}, {3.5, 5, 6, 7}, {8, 9, 10}};
  // Ranks: 1,2,3.5 | 3.5,5,6,7 | 8,9,10 ; n = 10.
  const double r1 = 6.5, r2 = 21.5, r3 = 27, n = 10;
  double h = 12 / (n * (n + 1)) * (r1 * r1 / 3 + r2 * r2 / 4 + r3 * r3 / 3) - 3 * (n + 1);
  h /= 1 - (8.0 - 2.0) / (n * n * n - n);
  const auto r = kruskal_wallis(g);
  EXPECT_NEAR(r.statistic, h, 1e-12);
  EXPECT_EQ(r.df, 2.0);
  EXPECT_NEAR(r.p_value, chi2_2_sf(h), 1e-12);
  EXPECT_NEAR(r.effect_size, h / (n - 1), 1e-12);
}

TEST(RankTests, ChiSquareIndependenceAndCramersV) {
  Eigen::MatrixXd t(3, 3);
  t << 10, 20, 0, 30, 15, 0, 5, 25, 0;  // the empty column is dropped
  const auto r = chi_square_test(t);
  EXPECT_EQ(r.df, 2.0);
  Eigen::MatrixXd o = t.leftCols(2);
  const double n = o.sum();
  double chi = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double e = o.row(i).sum() * o.col(j).sum() / n;
      chi += (o(i, j) - e) * (o(i, j) - e) / e;
    }
  }
  EXPECT_NEAR(r.statistic, chi, 1e-10);
  EXPECT_NEAR(r.p_value, chi2_2_sf(chi), 1e-12);
  EXPECT_NEAR(r.cramers_v, std::sqrt(chi / n), 1e-12);
}

TEST(UShape, WeightedLeastSquaresNormalEquations) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> x;
  std::vector<bool> y;
  for (int i = 0; i < 3000; ++i) {
    const double xi = 20 + 60 * u(rng);
    x.push_back(xi);
    y.push_back(u(rng) < 0.05 + 0.5 * std::pow((xi - 47) / 30, 2));
  }
  const auto f = u_shape_fit(x, y, 12);
  ASSERT_EQ(f.bins.size(), 12u);
  Eigen::MatrixXd a(12, 3);
  Eigen::VectorXd r(12), w(12);
  std::size_t total = 0;
  for (int k = 0; k < 12; ++k) {
    const auto& b = f.bins[static_cast<std::size_t>(k)];
    std::size_t n = 0, e = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool in = x[i] >= b.lower && (k == 11 ? x[i] <= b.upper : x[i] < b.upper);
      n += in;
      e += in && y[i];
    }
    EXPECT_EQ(b.n, n);
    EXPECT_EQ(b.events, e);
    total += n;
    a.row(k) << 1, b.center, b.center * b.center;
    r(k) = static_cast<double>(e) / static_cast<double>(n);
    w(k) = static_cast<double>(n);
  }
  EXPECT_EQ(total, x.size());
  const Eigen::Vector3d c = (a.transpose() * w.asDiagonal() * a).ldlt().solve(a.transpose() * w.asDiagonal() * r);
  EXPECT_NEAR(f.c0, c(0), 1e-8);
  EXPECT_NEAR(f.c1, c(1), 1e-9);
  EXPECT_NEAR(f.c2, c(2), 1e-11);
  EXPECT_NEAR(*f.vertex, -c(1) / (2 * c(2)), 1e-8);
  EXPECT_NEAR(*f.vertex, 47.0, 5.0);
  EXPECT_LT(f.p_value, 1e-6);
  EXPECT_THROW(u_shape_fit(std::vector<double>(20, 1.0), std::vector<bool>(20, true)), Error);
}

TEST(Pca, ExplainedVarianceAndOrthonormalComponents) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd d(200, 3);
  for (int i = 0; i < 200; ++i) {
    const double t = g(rng);
    d.row(i) << 3 * t + 0.1 * g(rng), -2 * t + 0.1 * g(rng), g(rng);
  }
  const auto p = pca(d);
  const Eigen::MatrixXd centered = d.rowwise() - d.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 199.0;
  EXPECT_NEAR(p.variances.sum(), cov.trace(), 1e-9);
  EXPECT_NEAR(p.explained_ratio.sum(), 1.0, 1e-12);
  EXPECT_LT((p.components.transpose() * p.components - Eigen::Matrix3d::Identity()).norm(), 1e-10);
  EXPECT_LT((cov * p.components.col(0) - p.variances(0) * p.components.col(0)).norm(), 1e-9);
  EXPECT_LT((p.scores - centered * p.components).norm(), 1e-9);
  EXPECT_THROW(pca(Eigen::MatrixXd(1, 3)), Error);
}

TEST(Pca, EllipsesFromGroupCovariance) {
  Eigen::MatrixX2d pts(6, 2);
  pts << 0, 0, 2, 0, 0, 1, 2, 1, 10, 10, 12, 10;
  const auto e = group_ellipses(pts, {0, 0, 0, 0, 1, 1});
  ASSERT_EQ(e.size(), 2u);
  EXPECT_NEAR(e[0].center.x(), 1.0, 1e-12);
  EXPECT_NEAR(e[0].center.y(), 0.5, 1e-12);
  // x variance 4/3, y variance 1/3, uncorrelated.
  EXPECT_NEAR(e[0].radii(0), 2 * std::sqrt(4.0 / 3), 1e-12);
  EXPECT_NEAR(e[0].radii(1), 2 * std::sqrt(1.0 / 3), 1e-12);
  EXPECT_NEAR(e[1].opacity, 0.5, 1e-12);
}

TEST(Registry, EchoesParamsAndCounts) {
  const auto c = exposure_cohort();
  const auto names = estimator_names();
  EXPECT_TRUE(std::is_sorted(names.begin(), names.end()));
  for (const char* n : {"summary", "prevalence", "incidence", "relative_risk", "kaplan_meier", "interaction_terms",
                        "u_shape_fit", "pca", "group_significance", "group_curvature"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
  }
  const json params{{"table", {30, 70, 10, 90}}};
  const auto rr = evaluate_estimator("relative_risk", params, c);
  EXPECT_EQ(rr.at("params"), params);
  EXPECT_DOUBLE_EQ(rr.at("result").at("rr").get<double>(), 3.0);
  EXPECT_EQ(rr.at("n_used"), 200);
  const auto km = evaluate_estimator("kaplan_meier", {{"time_attribute", "followup"}, {"event_attribute", "event"},
                                                      {"stratify_by", "sex"}}, c);
  EXPECT_EQ(km.at("result").at("curves").size(), 2u);
  EXPECT_EQ(km.at("n_used"), 400);
  const auto gs = evaluate_estimator("group_significance", {{"group_by", "sex"}, {"attribute", "age"}}, c);
  EXPECT_EQ(gs.at("result").at("test"), "mann_whitney");
  try {
    evaluate_estimator("median_survival", json::object(), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_estimator);
  }
  try {
    evaluate_estimator("summary", json::object(), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
  }
}
