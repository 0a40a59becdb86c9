#pragma once

#include <string>
#include <vector>

#include "cohortlab/fem/model.hpp"
#include "cohortlab/geometry.hpp"
#include "json.hpp"

namespace cohortlab::shape {

struct Centerline {
  std::string subject_id;
  std::vector<Vec3> points;  // ordered head to tail, mm; z = 0 for 2D data
};

/// Throws Error(invalid_argument) unless the centerline has `expected`
/// points (0 skips the count check) and consecutive points are distinct.
void validate(const Centerline& c, std::size_t expected = 93);

/// Maps every barycentric anchor of `model` through the fitted node positions.
/// Throws Error(degenerate_element) if an anchor element collapsed.
Centerline extract_centerline(const fem::ShapeModel& model, const std::vector<Vec3>& fitted_positions,
                              std::string subject_id);

/// CSV with header `subject_id,index,x,y,z`, one row per point.
std::string format_centerlines(const std::vector<Centerline>& lines);
std::vector<Centerline> parse_centerlines(std::string_view text);
void write_centerlines(const std::string& path, const std::vector<Centerline>& lines);
std::vector<Centerline> read_centerlines(const std::string& path);

nlohmann::json centerline_to_json(const Centerline& c);
Centerline centerline_from_json(const nlohmann::json& j);

}  // namespace cohortlab::shape
