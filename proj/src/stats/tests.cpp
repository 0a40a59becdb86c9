#include "cohortlab/stats/tests.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>

#include "cohortlab/error.hpp"

namespace cohortlab::stats {

using nlohmann::json;
using namespace cohortlab::cohort;

ChiSquareResult chi_square_test(const Eigen::MatrixXd& counts) {
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    if (counts.row(i).sum() > 0.0) rows.push_back(i);
  }
  for (Eigen::Index j = 0; j < counts.cols(); ++j) {
    if (counts.col(j).sum() > 0.0) cols.push_back(j);
  }
  if (rows.size() < 2 || cols.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "chi-square needs at least two non-empty rows and columns");
  }
  Eigen::MatrixXd t(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = counts(rows[i], cols[j]);
    }
  }
  const double n = t.sum();
  const Eigen::VectorXd rs = t.rowwise().sum();
  const Eigen::RowVectorXd cs = t.colwise().sum();
  ChiSquareResult r;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      const double e = rs(i) * cs(j) / n;
      r.statistic += (t(i, j) - e) * (t(i, j) - e) / e;
    }
  }
  r.df = static_cast<double>((t.rows() - 1) * (t.cols() - 1));
  r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.df), r.statistic));
  r.n = static_cast<std::size_t>(std::llround(n));
  const double m = static_cast<double>(std::min(t.rows(), t.cols()) - 1);
  r.cramers_v = std::sqrt(r.statistic / (n * m));
  return r;
}

namespace {

/// Mid-ranks of the pooled sample plus the tie term sum(t^3 - t).
std::vector<double> pooled_ranks(const std::vector<double>& v, double& tie_term) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  tie_term = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

}  // namespace

RankTestResult mann_whitney(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::empty_input, "Mann-Whitney needs two non-empty groups");
  std::vector<double> all = x;
  all.insert(all.end(), y.begin(), y.end());
  double ties = 0.0;
  const auto r = pooled_ranks(all, ties);
  const double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size()), n = n1 + n2;
  const double r1 = std::accumulate(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(x.size()), 0.0);
  RankTestResult out;
  out.test = "mann_whitney";
  out.statistic = r1 - n1 * (n1 + 1.0) / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  if (var > 0.0) {
    out.z = (out.statistic - n1 * n2 / 2.0) / std::sqrt(var);
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), std::abs(out.z)));
  }
  out.effect_size_name = "rank_biserial";
  out.effect_size = 2.0 * out.statistic / (n1 * n2) - 1.0;
  return out;
}

RankTestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::empty_input, "Kruskal-Wallis needs at least two groups");
  std::vector<double> all;
  for (const auto& g : groups) {
    if (g.empty()) throw Error(ErrorCode::empty_input, "Kruskal-Wallis group is empty");
    all.insert(all.end(), g.begin(), g.end());
  }
  double ties = 0.0;
  const auto r = pooled_ranks(all, ties);
  const double n = static_cast<double>(all.size());
  double sum = 0.0;
  std::size_t pos = 0;
  for (const auto& g : groups) {
    double rs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rs += r[pos + i];
    pos += g.size();
    sum += rs * rs / static_cast<double>(g.size());
  }
  RankTestResult out;
  out.test = "kruskal_wallis";
  out.df = static_cast<double>(groups.size() - 1);
  const double correction = 1.0 - ties / (n * n * n - n);
  if (correction > 0.0) {
    out.statistic = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
    out.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(out.df), std::max(0.0, out.statistic)));
  }
  out.effect_size_name = "epsilon_squared";
  out.effect_size = out.statistic / (n - 1.0);
  return out;
}

Grouping grouping_from_attribute(const Cohort& cohort, const std::string& attribute) {
  const auto& def = cohort.dictionary.at(attribute);
  if (!def.is_categorical()) throw Error(ErrorCode::invalid_argument, "grouping attribute must be categorical");
  Grouping g;
  g.names = def.categories;
  for (const auto& s : cohort.subjects) {
    const auto v = numeric(s.value(attribute));
    g.group.push_back(v ? std::optional<int>(static_cast<int>(*v)) : std::nullopt);
  }
  return g;
}

GroupSignificance group_significance(const Cohort& cohort, const Grouping& grouping, const std::string& attribute) {
  const auto& def = cohort.dictionary.at(attribute);
  if (grouping.group.size() != cohort.subjects.size()) {
    throw Error(ErrorCode::invalid_argument, "grouping does not match the cohort");
  }
  GroupSignificance out;
  out.attribute = attribute;
  std::vector<std::vector<double>> values(grouping.names.size());
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto v = numeric(cohort.subjects[i].value(attribute));
    const auto& g = grouping.group[i];
    if (!v || !g) {
      ++out.n_missing;
      continue;
    }
    values.at(static_cast<std::size_t>(*g)).push_back(*v);
  }
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k].size() >= 2) {
      kept.push_back(k);
      out.groups.emplace_back(grouping.names[k], values[k].size());
      out.n_used += values[k].size();
    } else {
      if (!values[k].empty()) out.dropped_groups.push_back(grouping.names[k]);
      out.n_missing += values[k].size();
    }
  }
  if (kept.size() < 2) throw Error(ErrorCode::empty_input, "significance test needs two groups with at least two values");
  if (def.kind == AttributeKind::nominal) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kept.size()),
                                              static_cast<Eigen::Index>(def.categories.size()));
    for (std::size_t r = 0; r < kept.size(); ++r) {
      for (double v : values[kept[r]]) t(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(v)) += 1.0;
    }
    const auto c = chi_square_test(t);
    out.test = "chi_square";
    out.statistic = c.statistic;
    out.df = c.df;
    out.p_value = c.p_value;
    out.effect_size_name = "cramers_v";
    out.effect_size = c.cramers_v;
  } else if (kept.size() == 2) {
    const auto m = mann_whitney(values[kept[0]], values[kept[1]]);
    out.test = m.test;
    out.statistic = m.statistic;
    out.p_value = m.p_value;
    out.effect_size_name = m.effect_size_name;
    out.effect_size = m.effect_size;
  } else {
    std::vector<std::vector<double>> gs;
    for (std::size_t k : kept) gs.push_back(values[k]);
    const auto m = kruskal_wallis(gs);
    out.test = m.test;
    out.statistic = m.statistic;
    out.df = m.df;
    out.p_value = m.p_value;
    out.effect_size_name = m.effect_size_name;
    out.effect_size = m.effect_size;
  }
  return out;
}

json significance_to_json(const GroupSignificance& g) {
  json groups = json::array();
  for (const auto& [name, n] : g.groups) groups.push_back({{"group", name}, {"n", n}});
  return json{{"attribute", g.attribute},   {"test", g.test},
              {"statistic", g.statistic},   {"df", g.df},
              {"p_value", g.p_value},       {"effect_size_name", g.effect_size_name},
              {"effect_size", g.effect_size}, {"groups", groups},
              {"dropped_groups", g.dropped_groups}, {"n_used", g.n_used},
              {"n_missing", g.n_missing}};
}

}  // namespace cohortlab::stats
