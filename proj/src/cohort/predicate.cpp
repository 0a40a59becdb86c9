#include "cohortlab/cohort/predicate.hpp"

#include <algorithm>

#include "cohortlab/error.hpp"

namespace cohortlab::cohort {

using nlohmann::json;

std::string_view to_string(PredicateOp op) noexcept {
  switch (op) {
    case PredicateOp::in_categories: return "in_categories";
    case PredicateOp::rank_range: return "rank_range";
    case PredicateOp::value_range: return "value_range";
    case PredicateOp::is_missing: return "is_missing";
  }
  return "value_range";
}

PredicateOp parse_predicate_op(std::string_view text) {
  for (auto op : {PredicateOp::in_categories, PredicateOp::rank_range, PredicateOp::value_range,
                  PredicateOp::is_missing}) {
    if (text == to_string(op)) return op;
  }
  throw Error(ErrorCode::invalid_argument, "unknown predicate operator '" + std::string(text) + "'");
}

void check_predicate(const SelectionPredicate& p, const DataDictionary& dictionary) {
  const auto& def = dictionary.at(p.attribute);
  auto incompatible = [&] {
    return Error(ErrorCode::incompatible_predicate, std::string(to_string(p.op)) + " is not valid for " +
                                                        std::string(to_string(def.kind)) + " attribute '" +
                                                        p.attribute + "'");
  };
  switch (p.op) {
    case PredicateOp::in_categories:
      if (!def.is_categorical()) throw incompatible();
      if (p.categories.empty()) throw Error(ErrorCode::invalid_argument, "in_categories needs at least one category");
      for (const auto& c : p.categories) {
        if (!def.category_index(c)) {
          throw Error(ErrorCode::invalid_argument, "unknown category '" + c + "' of '" + p.attribute + "'");
        }
      }
      break;
    case PredicateOp::rank_range:
      if (def.kind != AttributeKind::ordinal) throw incompatible();
      if (!p.min_rank && !p.max_rank) throw Error(ErrorCode::invalid_argument, "rank_range needs a bound");
      break;
    case PredicateOp::value_range:
      if (def.kind != AttributeKind::scalar) throw incompatible();
      if (!p.min && !p.max) throw Error(ErrorCode::invalid_argument, "value_range needs a bound");
      break;
    case PredicateOp::is_missing:
      break;
  }
}

bool matches(const SelectionPredicate& p, const AttributeDef& def, const SubjectRecord& record) {
  const Value v = record.value(p.attribute);
  if (p.op == PredicateOp::is_missing) return is_missing(v);
  if (is_missing(v)) return false;
  switch (p.op) {
    case PredicateOp::in_categories: {
      const int idx = std::holds_alternative<CategoryIndex>(v) ? std::get<CategoryIndex>(v).index
                                                               : std::get<OrdinalRank>(v).rank;
      return std::any_of(p.categories.begin(), p.categories.end(),
                         [&](const std::string& c) { return def.category_index(c) == idx; });
    }
    case PredicateOp::rank_range: {
      const int r = std::get<OrdinalRank>(v).rank;
      return (!p.min_rank || r >= *p.min_rank) && (!p.max_rank || r <= *p.max_rank);
    }
    case PredicateOp::value_range: {
      const double x = std::get<double>(v);
      if (p.min && (p.min_inclusive ? x < *p.min : x <= *p.min)) return false;
      if (p.max && (p.max_inclusive ? x > *p.max : x >= *p.max)) return false;
      return true;
    }
    case PredicateOp::is_missing: break;
  }
  return false;
}

std::vector<std::size_t> select(const Cohort& cohort, const std::vector<SelectionPredicate>& predicates) {
  std::vector<const AttributeDef*> defs;
  for (const auto& p : predicates) {
    check_predicate(p, cohort.dictionary);
    defs.push_back(&cohort.dictionary.at(p.attribute));
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < predicates.size() && ok; ++k) ok = matches(predicates[k], *defs[k], cohort.subjects[i]);
    if (ok) out.push_back(i);
  }
  return out;
}

Cohort subset(const Cohort& cohort, const std::vector<std::size_t>& indices) {
  Cohort out;
  out.dictionary = cohort.dictionary;
  out.wave = cohort.wave;
  out.subjects.reserve(indices.size());
  for (std::size_t i : indices) out.subjects.push_back(cohort.subjects.at(i));
  return out;
}

json predicate_to_json(const SelectionPredicate& p) {
  json j{{"attribute", p.attribute}, {"op", to_string(p.op)}};
  switch (p.op) {
    case PredicateOp::in_categories: j["categories"] = p.categories; break;
    case PredicateOp::rank_range:
      j["min"] = p.min_rank ? json(*p.min_rank) : json(nullptr);
      j["max"] = p.max_rank ? json(*p.max_rank) : json(nullptr);
      break;
    case PredicateOp::value_range:
      j["min"] = p.min ? json(*p.min) : json(nullptr);
      j["max"] = p.max ? json(*p.max) : json(nullptr);
      j["min_inclusive"] = p.min_inclusive;
      j["max_inclusive"] = p.max_inclusive;
      break;
    case PredicateOp::is_missing: break;
  }
  return j;
}

SelectionPredicate predicate_from_json(const json& j, const DataDictionary& dictionary) {
  SelectionPredicate p;
  try {
    p.attribute = j.at("attribute").get<std::string>();
    p.op = parse_predicate_op(j.at("op").get<std::string>());
    const auto& def = dictionary.at(p.attribute);
    auto rank_of = [&](const json& v) -> std::optional<int> {
      if (v.is_null()) return std::nullopt;
      if (v.is_string()) {
        const auto idx = def.category_index(v.get<std::string>());
        if (!idx) throw Error(ErrorCode::invalid_argument, "unknown category '" + v.get<std::string>() + "'");
        return idx;
      }
      return v.get<int>();
    };
    auto number = [](const json& v) -> std::optional<double> {
      if (v.is_null()) return std::nullopt;
      return v.get<double>();
    };
    switch (p.op) {
      case PredicateOp::in_categories: p.categories = j.at("categories").get<std::vector<std::string>>(); break;
      case PredicateOp::rank_range:
        if (j.contains("min")) p.min_rank = rank_of(j["min"]);
        if (j.contains("max")) p.max_rank = rank_of(j["max"]);
        break;
      case PredicateOp::value_range:
        if (j.contains("min")) p.min = number(j["min"]);
        if (j.contains("max")) p.max = number(j["max"]);
        p.min_inclusive = j.value("min_inclusive", true);
        p.max_inclusive = j.value("max_inclusive", true);
        break;
      case PredicateOp::is_missing: break;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("predicate: ") + e.what());
  }
  check_predicate(p, dictionary);
  return p;
}

std::vector<SelectionPredicate> predicates_from_json(const json& j, const DataDictionary& dictionary) {
  if (!j.is_array()) throw Error(ErrorCode::parse_error, "predicates must be an array");
  std::vector<SelectionPredicate> out;
  for (const auto& e : j) out.push_back(predicate_from_json(e, dictionary));
  return out;
}

json predicates_to_json(const std::vector<SelectionPredicate>& ps) {
  json a = json::array();
  for (const auto& p : ps) a.push_back(predicate_to_json(p));
  return a;
}

}  // namespace cohortlab::cohort
