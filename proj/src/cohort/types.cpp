#include "cohortlab/cohort/types.hpp"

#include <algorithm>
#include <set>

#include "cohortlab/error.hpp"

namespace cohortlab::cohort {

std::string_view to_string(AttributeKind kind) noexcept {
  switch (kind) {
    case AttributeKind::nominal: return "nominal";
    case AttributeKind::ordinal: return "ordinal";
    case AttributeKind::scalar: return "scalar";
  }
  return "scalar";
}

AttributeKind parse_attribute_kind(std::string_view text) {
  if (text == "nominal") return AttributeKind::nominal;
  if (text == "ordinal") return AttributeKind::ordinal;
  if (text == "scalar") return AttributeKind::scalar;
  throw Error(ErrorCode::invalid_attribute, "unknown attribute kind '" + std::string(text) + "'");
}

std::optional<int> AttributeDef::category_index(std::string_view label) const {
  auto it = std::find(categories.begin(), categories.end(), label);
  if (it == categories.end()) return std::nullopt;
  return static_cast<int>(it - categories.begin());
}

bool AttributeDef::is_missing_code(std::string_view token) const {
  return std::find(missing_codes.begin(), missing_codes.end(), token) != missing_codes.end();
}

namespace {

void validate(const AttributeDef& def) {
  if (def.name.empty()) throw Error(ErrorCode::invalid_attribute, "attribute with empty name");
  if (def.is_categorical()) {
    const std::size_t min_categories = def.kind == AttributeKind::ordinal ? 2 : 1;
    if (def.categories.size() < min_categories) {
      throw Error(ErrorCode::invalid_attribute,
                  "attribute '" + def.name + "': " + std::string(to_string(def.kind)) +
                      " needs at least " + std::to_string(min_categories) + " categories");
    }
    std::set<std::string_view> seen;
    for (const auto& c : def.categories) {
      if (!seen.insert(c).second) {
        throw Error(ErrorCode::invalid_attribute,
                    "attribute '" + def.name + "': duplicate category '" + c + "'");
      }
    }
  } else {
    if (!def.categories.empty()) {
      throw Error(ErrorCode::invalid_attribute,
                  "attribute '" + def.name + "': scalar attributes take no categories");
    }
    if (def.valid_range && !(def.valid_range->min <= def.valid_range->max)) {
      throw Error(ErrorCode::invalid_attribute,
                  "attribute '" + def.name + "': valid_range min > max");
    }
  }
}

}  // namespace

DataDictionary::DataDictionary(std::vector<AttributeDef> attributes)
    : attributes_(std::move(attributes)) {
  std::set<std::string_view> names;
  for (const auto& def : attributes_) {
    validate(def);
    if (!names.insert(def.name).second) {
      throw Error(ErrorCode::duplicate_attribute, "duplicate attribute '" + def.name + "'");
    }
  }
}

const AttributeDef* DataDictionary::find(std::string_view name) const {
  for (const auto& def : attributes_) {
    if (def.name == name) return &def;
  }
  return nullptr;
}

const AttributeDef& DataDictionary::at(std::string_view name) const {
  if (const auto* def = find(name)) return *def;
  throw Error(ErrorCode::unknown_attribute, "unknown attribute '" + std::string(name) + "'");
}

std::pair<std::size_t, std::size_t> DataDictionary::kind_counts() const {
  std::size_t categorical = 0;
  for (const auto& def : attributes_) categorical += def.is_categorical() ? 1 : 0;
  return {categorical, attributes_.size() - categorical};
}

std::optional<double> numeric(const Value& v) noexcept {
  if (const auto* c = std::get_if<CategoryIndex>(&v)) return c->index;
  if (const auto* r = std::get_if<OrdinalRank>(&v)) return r->rank;
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nullopt;
}

Value SubjectRecord::value(std::string_view attribute) const {
  auto it = values.find(attribute);
  return it == values.end() ? Value{Missing{}} : it->second;
}

const SubjectRecord* Cohort::find(std::string_view id) const {
  for (const auto& s : subjects) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

}  // namespace cohortlab::cohort
