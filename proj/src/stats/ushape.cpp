#include "cohortlab/stats/ushape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "cohortlab/error.hpp"

namespace cohortlab::stats {

using nlohmann::json;
using namespace cohortlab::cohort;

UShapeFit u_shape_fit(const std::vector<double>& x, const std::vector<bool>& y, std::size_t n_bins) {
  if (x.size() != y.size()) throw Error(ErrorCode::invalid_argument, "x and outcome differ in length");
  if (x.size() < 10) throw Error(ErrorCode::invalid_argument, "u-shape fit needs at least 10 complete pairs");
  if (n_bins < 4) throw Error(ErrorCode::invalid_argument, "u-shape fit needs at least 4 bins");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw Error(ErrorCode::invalid_argument, "all x values are identical");
  UShapeFit f;
  f.n_used = x.size();
  const double w = (hi - lo) / static_cast<double>(n_bins);
  std::vector<RateBin> bins(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    bins[k].lower = lo + static_cast<double>(k) * w;
    bins[k].upper = k + 1 == n_bins ? hi : lo + static_cast<double>(k + 1) * w;
    bins[k].center = 0.5 * (bins[k].lower + bins[k].upper);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto k = std::min(n_bins - 1, static_cast<std::size_t>((x[i] - lo) / w));
    ++bins[k].n;
    bins[k].events += y[i];
  }
  for (auto& b : bins) {
    if (b.n > 0) {
      b.rate = static_cast<double>(b.events) / static_cast<double>(b.n);
      f.bins.push_back(b);
    }
  }
  const auto m = static_cast<Eigen::Index>(f.bins.size());
  if (m < 4) throw Error(ErrorCode::invalid_argument, "u-shape fit needs at least 4 non-empty bins");

  // Centre and scale x for conditioning, then map coefficients back.
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  Eigen::MatrixXd A(m, 3);
  Eigen::VectorXd r(m), sw(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& b = f.bins[static_cast<std::size_t>(i)];
    const double u = (b.center - mid) / half;
    sw(i) = std::sqrt(static_cast<double>(b.n));
    A.row(i) << sw(i), sw(i) * u, sw(i) * u * u;
    r(i) = sw(i) * b.rate;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::Vector3d g = qr.solve(r);
  const Eigen::VectorXd resid = r - A * g;
  f.df = static_cast<double>(m - 3);
  const double sigma2 = resid.squaredNorm() / f.df;
  const Eigen::Matrix3d cov = sigma2 * (A.transpose() * A).inverse();

  f.c2 = g(2) / (half * half);
  f.c1 = g(1) / half - 2.0 * mid * g(2) / (half * half);
  f.c0 = g(0) - g(1) * mid / half + g(2) * mid * mid / (half * half);
  f.se_c2 = std::sqrt(std::max(0.0, cov(2, 2))) / (half * half);
  if (f.se_c2 > 0.0) {
    f.t_c2 = f.c2 / f.se_c2;
    f.p_value = boost::math::cdf(boost::math::complement(boost::math::students_t(f.df), f.t_c2));
  } else {
    f.t_c2 = f.c2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    f.p_value = f.c2 > 0.0 ? 0.0 : 1.0;
  }
  if (f.c2 != 0.0 && std::abs(g(2)) > 1e-12 * (std::abs(g(0)) + std::abs(g(1)) + std::abs(g(2)))) {
    f.vertex = -f.c1 / (2.0 * f.c2);
  }
  double sw_total = 0.0, mean = 0.0;
  for (const auto& b : f.bins) {
    sw_total += static_cast<double>(b.n);
    mean += static_cast<double>(b.n) * b.rate;
  }
  mean /= sw_total;
  double ss_tot = 0.0;
  for (const auto& b : f.bins) ss_tot += static_cast<double>(b.n) * (b.rate - mean) * (b.rate - mean);
  f.r_squared = ss_tot > 0.0 ? 1.0 - resid.squaredNorm() / ss_tot : 1.0;
  return f;
}

UShapeFit u_shape_fit(const Cohort& cohort, const std::string& x_attribute, const std::vector<SelectionPredicate>& outcome,
                      std::size_t n_bins) {
  if (cohort.dictionary.at(x_attribute).kind != AttributeKind::scalar) {
    throw Error(ErrorCode::invalid_argument, "u-shape x attribute must be scalar");
  }
  if (outcome.empty()) throw Error(ErrorCode::invalid_argument, "outcome needs at least one predicate");
  std::vector<const AttributeDef*> defs;
  for (const auto& p : outcome) {
    check_predicate(p, cohort.dictionary);
    defs.push_back(&cohort.dictionary.at(p.attribute));
  }
  std::vector<double> x;
  std::vector<bool> y;
  std::size_t missing = 0;
  for (const auto& s : cohort.subjects) {
    const auto v = numeric(s.value(x_attribute));
    bool skip = !v, ok = true;
    for (std::size_t i = 0; i < outcome.size() && !skip; ++i) {
      if (outcome[i].op != PredicateOp::is_missing && is_missing(s.value(outcome[i].attribute))) skip = true;
      ok = ok && matches(outcome[i], *defs[i], s);
    }
    if (skip) {
      ++missing;
      continue;
    }
    x.push_back(*v);
    y.push_back(ok);
  }
  auto f = u_shape_fit(x, y, n_bins);
  f.n_missing = missing;
  return f;
}

json ushape_to_json(const UShapeFit& f) {
  json bins = json::array();
  for (const auto& b : f.bins) {
    bins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"center", b.center}, {"n", b.n}, {"events", b.events},
                    {"rate", b.rate}});
  }
  return json{{"coefficients", {f.c0, f.c1, f.c2}},
              {"se_c2", f.se_c2},
              {"t_c2", std::isfinite(f.t_c2) ? json(f.t_c2) : json(nullptr)},
              {"df", f.df},
              {"p_value_c2_positive", f.p_value},
              {"vertex", f.vertex ? json(*f.vertex) : json(nullptr)},
              {"r_squared", f.r_squared},
              {"method", "weighted_least_squares_binned_rates"},
              {"bins", bins},
              {"n_used", f.n_used},
              {"n_missing", f.n_missing}};
}

}  // namespace cohortlab::stats
