#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cohortlab::cohort {

enum class AttributeKind { nominal, ordinal, scalar };

std::string_view to_string(AttributeKind kind) noexcept;
AttributeKind parse_attribute_kind(std::string_view text);

struct ValueRange {
  double min = 0.0;
  double max = 0.0;
  bool contains(double v) const noexcept { return v >= min && v <= max; }
  bool operator==(const ValueRange&) const = default;
};

struct AttributeDef {
  std::string name;
  AttributeKind kind = AttributeKind::scalar;
  std::vector<std::string> categories;  // nominal/ordinal; order is the rank order for ordinal
  std::string unit;                     // scalar only
  std::optional<ValueRange> valid_range;
  std::vector<std::string> missing_codes;

  bool is_categorical() const noexcept { return kind != AttributeKind::scalar; }
  std::optional<int> category_index(std::string_view label) const;
  bool is_missing_code(std::string_view token) const;

  bool operator==(const AttributeDef&) const = default;
};

/// Validated, name-unique list of attribute definitions.
class DataDictionary {
 public:
  DataDictionary() = default;
  /// Throws Error(duplicate_attribute / invalid_attribute) on violations.
  explicit DataDictionary(std::vector<AttributeDef> attributes);

  const std::vector<AttributeDef>& attributes() const noexcept { return attributes_; }
  std::size_t size() const noexcept { return attributes_.size(); }

  const AttributeDef* find(std::string_view name) const;
  /// Throws Error(unknown_attribute).
  const AttributeDef& at(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  /// (nominal + ordinal count, scalar count)
  std::pair<std::size_t, std::size_t> kind_counts() const;

  bool operator==(const DataDictionary& other) const { return attributes_ == other.attributes_; }

 private:
  std::vector<AttributeDef> attributes_;
};

struct Missing {
  bool operator==(const Missing&) const = default;
};
struct CategoryIndex {
  int index = 0;
  bool operator==(const CategoryIndex&) const = default;
};
struct OrdinalRank {
  int rank = 0;
  bool operator==(const OrdinalRank&) const = default;
};

/// Typed cell value. Missing is an explicit alternative, never a sentinel.
using Value = std::variant<Missing, CategoryIndex, OrdinalRank, double>;

inline bool is_missing(const Value& v) noexcept { return std::holds_alternative<Missing>(v); }

/// Numeric view: category index, ordinal rank, or scalar; nullopt for Missing.
std::optional<double> numeric(const Value& v) noexcept;

struct SubjectRecord {
  std::string id;
  std::map<std::string, Value, std::less<>> values;

  /// Missing when the attribute has no entry.
  Value value(std::string_view attribute) const;

  bool operator==(const SubjectRecord&) const = default;
};

struct Cohort {
  DataDictionary dictionary;
  std::vector<SubjectRecord> subjects;
  std::string wave;

  const SubjectRecord* find(std::string_view id) const;

  bool operator==(const Cohort&) const = default;
};

struct OutOfRangeFlag {
  std::size_t row = 0;  // 1-based data row (header excluded)
  std::string subject_id;
  std::string attribute;
  double value = 0.0;
};

struct RowError {
  std::size_t row = 0;
  std::string message;
};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t rows_rejected = 0;
  std::map<std::string, std::size_t, std::less<>> missing;
  std::vector<OutOfRangeFlag> out_of_range;
  std::vector<RowError> errors;
};

}  // namespace cohortlab::cohort
