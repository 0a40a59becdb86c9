#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cohortlab/cohort/types.hpp"
#include "cohortlab/stats/registry.hpp"
#include "json.hpp"

namespace cohortlab::service {

struct ParallelSetsBox {
  std::string category;
  std::size_t width = 0;
  std::size_t selected_width = 0;
  bool highlight = false;
};

struct ParallelSetsRibbon {
  std::size_t axis = 0;  // connects axis and axis + 1
  std::string from;
  std::string to;
  std::size_t width = 0;
  std::size_t selected_width = 0;
  std::size_t highlight_width = 0;
};

struct ParallelSetsAxis {
  std::string attribute;
  std::vector<ParallelSetsBox> boxes;
};

struct ParallelSetsLayout {
  std::vector<ParallelSetsAxis> axes;
  std::vector<ParallelSetsRibbon> ribbons;  // only non-empty ribbons
  std::size_t n_used = 0;
  std::size_t n_missing = 0;  // missing on any axis, or outside the bins
};

struct Highlight {
  std::string attribute;
  std::string category;
};

/// Widths are subject counts over subjects complete on every axis. Scalar
/// axes need bin edges in `bins`; otherwise Error(invalid_argument).
/// Conservation (ribbons into and out of a box sum to its width) is checked
/// on every layout and a violation throws std::logic_error.
ParallelSetsLayout parallel_sets_layout(const cohort::Cohort& cohort, const std::vector<std::string>& attributes,
                                        const std::map<std::string, std::vector<double>, std::less<>>& bins,
                                        const std::optional<Highlight>& highlight, const std::vector<bool>& selected);

/// Throws std::logic_error when a box width differs from its ribbon sums.
void check_conservation(const ParallelSetsLayout& layout);

nlohmann::json parallel_sets_to_json(const ParallelSetsLayout& layout);

/// The KM plot covers the selected subjects only; other views flag them.
/// Kinds: parallel_coordinates, scatterplot, parallel_sets, ribbon, km_plot, boxplot_tooltip.
/// `selected` flags each cohort subject. Throws Error(invalid_argument) for an unknown view.
nlohmann::json view_model(const std::string& view, const nlohmann::json& params, const cohort::Cohort& cohort,
                          const std::vector<bool>& selected, const stats::EstimatorContext& context);

std::vector<std::string> view_names();

}  // namespace cohortlab::service
