#pragma once

#include <string>
#include <string_view>

#include "cohortlab/cohort/types.hpp"
#include "json.hpp"

namespace cohortlab::cohort {

// Dictionary files are JSON: {"attributes": [{"name", "kind", "categories",
// "unit", "valid_range": [min, max], "missing_codes"}, ...]}.
DataDictionary parse_dictionary(const nlohmann::json& doc);
DataDictionary load_dictionary(const std::string& path);
nlohmann::json dictionary_to_json(const DataDictionary& dictionary);

struct IngestResult {
  Cohort cohort;
  IngestStats stats;
};

struct CsvOptions {
  char delimiter = ',';
  std::string id_column = "id";
};

/// Parses delimiter-separated text. The header names `id_column` plus
/// dictionary attributes; an unknown header column throws
/// Error(unknown_attribute). Malformed rows are rejected and reported, the
/// rest of the file is still ingested. Out-of-range scalars are kept and flagged.
IngestResult parse_cohort(std::string_view text, const DataDictionary& dictionary,
                          const CsvOptions& options = {});
IngestResult load_cohort(const std::string& path, const DataDictionary& dictionary,
                         const CsvOptions& options = {});

/// Writes the cohort in the same format parse_cohort reads (missing = empty cell).
std::string format_cohort(const Cohort& cohort, const CsvOptions& options = {});
void write_cohort(const std::string& path, const Cohort& cohort, const CsvOptions& options = {});

/// SHA-256 over the dictionary JSON and the canonical CSV serialization.
std::string cohort_digest(const Cohort& cohort);

nlohmann::json ingest_stats_to_json(const IngestStats& stats);
nlohmann::json value_to_json(const AttributeDef& def, const Value& value);

}  // namespace cohortlab::cohort
