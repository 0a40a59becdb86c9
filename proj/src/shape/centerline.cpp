#include "cohortlab/shape/centerline.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "cohortlab/digest.hpp"
#include "cohortlab/error.hpp"
#include "cohortlab/fem/assembly.hpp"

namespace cohortlab::shape {

using nlohmann::json;

void validate(const Centerline& c, std::size_t expected) {
  if (expected != 0 && c.points.size() != expected) {
    throw Error(ErrorCode::invalid_argument, "centerline '" + c.subject_id + "' has " +
                                                 std::to_string(c.points.size()) + " points, expected " +
                                                 std::to_string(expected));
  }
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    if (c.points[i] == c.points[i - 1]) {
      throw Error(ErrorCode::invalid_argument,
                  "centerline '" + c.subject_id + "' repeats point " + std::to_string(i));
    }
  }
}

Centerline extract_centerline(const fem::ShapeModel& model, const std::vector<Vec3>& fitted_positions,
                              std::string subject_id) {
  if (fitted_positions.size() != model.nodes.size()) {
    throw Error(ErrorCode::invalid_argument, "fitted positions do not match the model node count");
  }
  Centerline c;
  c.subject_id = std::move(subject_id);
  const int npe = model.nodes_per_element();
  for (const auto& a : model.anchors) {
    const auto& el = model.elements.at(static_cast<std::size_t>(a.element));
    std::array<Vec3, 4> v;
    for (int k = 0; k < npe; ++k) v[static_cast<std::size_t>(k)] = fitted_positions[static_cast<std::size_t>(el[static_cast<std::size_t>(k)])];
    const double measure = fem::element_measure(model.dim, std::span<const Vec3>(v.data(), static_cast<std::size_t>(npe)));
    if (!(std::abs(measure) > 1e-12)) {
      throw Error(ErrorCode::degenerate_element, "anchor element " + std::to_string(a.element) + " collapsed after fit");
    }
    Vec3 p = Vec3::Zero();
    for (int k = 0; k < npe; ++k) p += a.weights[static_cast<std::size_t>(k)] * v[static_cast<std::size_t>(k)];
    c.points.push_back(p);
  }
  return c;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw Error(ErrorCode::parse_error, "centerline file line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string format_centerlines(const std::vector<Centerline>& lines) {
  std::string out = "subject_id,index,x,y,z\n";
  for (const auto& c : lines) {
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      const auto& p = c.points[i];
      out += c.subject_id + "," + std::to_string(i) + "," + fmt(p.x()) + "," + fmt(p.y()) + "," + fmt(p.z()) + "\n";
    }
  }
  return out;
}

std::vector<Centerline> parse_centerlines(std::string_view text) {
  std::vector<Centerline> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "subject_id,index,x,y,z") throw Error(ErrorCode::parse_error, "centerline file: unexpected header");
      continue;
    }
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 5) throw Error(ErrorCode::parse_error, "centerline file line " + std::to_string(line_no) + ": expected 5 fields");
    const std::string id(f[0]);
    const auto index = static_cast<std::size_t>(parse_double(f[1], line_no));
    if (out.empty() || out.back().subject_id != id) out.push_back(Centerline{id, {}});
    if (index != out.back().points.size()) {
      throw Error(ErrorCode::parse_error, "centerline file line " + std::to_string(line_no) + ": point index out of order");
    }
    out.back().points.emplace_back(parse_double(f[2], line_no), parse_double(f[3], line_no), parse_double(f[4], line_no));
  }
  return out;
}

void write_centerlines(const std::string& path, const std::vector<Centerline>& lines) {
  write_file(path, format_centerlines(lines));
}

std::vector<Centerline> read_centerlines(const std::string& path) { return parse_centerlines(read_file(path)); }

json centerline_to_json(const Centerline& c) {
  json pts = json::array();
  for (const auto& p : c.points) pts.push_back({p.x(), p.y(), p.z()});
  return json{{"subject_id", c.subject_id}, {"points", pts}};
}

Centerline centerline_from_json(const json& j) {
  Centerline c;
  c.subject_id = j.at("subject_id").get<std::string>();
  for (const auto& p : j.at("points")) {
    c.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.size() > 2 ? p.at(2).get<double>() : 0.0);
  }
  return c;
}

}  // namespace cohortlab::shape
