#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cohortlab/cohort/types.hpp"
#include "json.hpp"

namespace cohortlab::cohort {

enum class PredicateOp { in_categories, rank_range, value_range, is_missing };
std::string_view to_string(PredicateOp op) noexcept;
PredicateOp parse_predicate_op(std::string_view text);

/// One brushing condition. Missing values fail every operator except is_missing.
///   in_categories: nominal or ordinal, `categories` holds labels
///   rank_range:    ordinal, inclusive ranks [min_rank, max_rank]
///   value_range:   scalar, bounds optional, inclusiveness per side
///   is_missing:    any kind
struct SelectionPredicate {
  std::string attribute;
  PredicateOp op = PredicateOp::value_range;
  std::vector<std::string> categories;
  std::optional<int> min_rank;
  std::optional<int> max_rank;
  std::optional<double> min;
  std::optional<double> max;
  bool min_inclusive = true;
  bool max_inclusive = true;

  bool operator==(const SelectionPredicate&) const = default;
};

/// Throws Error(unknown_attribute) or Error(incompatible_predicate), or
/// Error(invalid_argument) for unknown category labels and empty operands.
void check_predicate(const SelectionPredicate& p, const DataDictionary& dictionary);

bool matches(const SelectionPredicate& p, const AttributeDef& def, const SubjectRecord& record);

/// Indices of subjects satisfying every predicate (an empty list selects all).
std::vector<std::size_t> select(const Cohort& cohort, const std::vector<SelectionPredicate>& predicates);

/// Copy of the cohort restricted to `indices`, order preserved.
Cohort subset(const Cohort& cohort, const std::vector<std::size_t>& indices);

nlohmann::json predicate_to_json(const SelectionPredicate& p);
/// Accepts ordinal bounds as ranks or labels ("min"/"max" for rank_range).
SelectionPredicate predicate_from_json(const nlohmann::json& j, const DataDictionary& dictionary);
std::vector<SelectionPredicate> predicates_from_json(const nlohmann::json& j, const DataDictionary& dictionary);
nlohmann::json predicates_to_json(const std::vector<SelectionPredicate>& ps);

}  // namespace cohortlab::cohort
