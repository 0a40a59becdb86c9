#include "cohortlab/cohort/io.hpp"

#include <charconv>
#include <set>
#include <sstream>

#include "cohortlab/digest.hpp"
#include "cohortlab/error.hpp"

namespace cohortlab::cohort {

using nlohmann::json;

DataDictionary parse_dictionary(const json& doc) {
  const json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("attributes")) {
      throw Error(ErrorCode::parse_error, "dictionary: missing 'attributes' array");
    }
    list = &doc.at("attributes");
  }
  if (!list->is_array()) throw Error(ErrorCode::parse_error, "dictionary: 'attributes' is not an array");

  std::vector<AttributeDef> defs;
  try {
    for (const auto& item : *list) {
      AttributeDef def;
      def.name = item.at("name").get<std::string>();
      def.kind = parse_attribute_kind(item.at("kind").get<std::string>());
      if (item.contains("categories")) def.categories = item.at("categories").get<std::vector<std::string>>();
      if (item.contains("unit")) def.unit = item.at("unit").get<std::string>();
      if (item.contains("valid_range") && !item.at("valid_range").is_null()) {
        const auto& r = item.at("valid_range");
        if (!r.is_array() || r.size() != 2) {
          throw Error(ErrorCode::invalid_attribute, "attribute '" + def.name + "': valid_range must be [min, max]");
        }
        def.valid_range = ValueRange{r[0].get<double>(), r[1].get<double>()};
      }
      if (item.contains("missing_codes")) {
        def.missing_codes = item.at("missing_codes").get<std::vector<std::string>>();
      }
      defs.push_back(std::move(def));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("dictionary: ") + e.what());
  }
  return DataDictionary(std::move(defs));
}

DataDictionary load_dictionary(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse_error, path + ": " + e.what());
  }
  return parse_dictionary(doc);
}

json dictionary_to_json(const DataDictionary& dictionary) {
  json list = json::array();
  for (const auto& def : dictionary.attributes()) {
    json item{{"name", def.name}, {"kind", to_string(def.kind)}};
    if (def.is_categorical()) item["categories"] = def.categories;
    if (!def.unit.empty()) item["unit"] = def.unit;
    if (def.valid_range) item["valid_range"] = {def.valid_range->min, def.valid_range->max};
    item["missing_codes"] = def.missing_codes;
    list.push_back(std::move(item));
  }
  return json{{"attributes", std::move(list)}};
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// RFC 4180-style field split of one logical line; quotes may contain delimiters.
bool split_line(std::string_view line, char delim, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && trim(field).empty()) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (ch == delim) {
      out.push_back(was_quoted ? field : std::string(trim(field)));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(ch);
    }
  }
  if (quoted) return false;
  out.push_back(was_quoted ? field : std::string(trim(field)));
  return true;
}

std::vector<std::string_view> split_rows(std::string_view text) {
  std::vector<std::string_view> rows;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view row = text.substr(start, end - start);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    rows.push_back(row);
    start = end + 1;
  }
  return rows;
}

std::optional<double> parse_double(std::string_view token) {
  double v = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  if (!token.empty() && token.front() == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s, char delim) {
  if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos &&
      s.find('\n') == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace

IngestResult parse_cohort(std::string_view text, const DataDictionary& dictionary,
                          const CsvOptions& options) {
  IngestResult result;
  result.cohort.dictionary = dictionary;
  for (const auto& def : dictionary.attributes()) result.stats.missing[def.name] = 0;

  auto rows = split_rows(text);
  std::size_t header_index = 0;
  while (header_index < rows.size() && trim(rows[header_index]).empty()) ++header_index;
  if (header_index == rows.size()) return result;  // empty file: empty cohort

  std::vector<std::string> header;
  if (!split_line(rows[header_index], options.delimiter, header)) {
    throw Error(ErrorCode::parse_error, "header row: unterminated quote");
  }
  if (!header.empty() && header.front().starts_with("\xEF\xBB\xBF")) header.front().erase(0, 3);

  int id_col = -1;
  std::vector<const AttributeDef*> column_defs(header.size(), nullptr);
  std::set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!seen.insert(header[c]).second) {
      throw Error(ErrorCode::parse_error, "duplicate column '" + header[c] + "'");
    }
    if (header[c] == options.id_column) {
      id_col = static_cast<int>(c);
      continue;
    }
    column_defs[c] = dictionary.find(header[c]);
    if (!column_defs[c]) {
      throw Error(ErrorCode::unknown_attribute, "unknown attribute column '" + header[c] + "'");
    }
  }
  if (id_col < 0) throw Error(ErrorCode::parse_error, "missing id column '" + options.id_column + "'");

  std::set<std::string, std::less<>> ids;
  std::vector<std::string> fields;
  std::size_t data_row = 0;
  for (std::size_t r = header_index + 1; r < rows.size(); ++r) {
    if (trim(rows[r]).empty()) continue;
    ++data_row;
    ++result.stats.rows_read;
    auto reject = [&](std::string message) {
      ++result.stats.rows_rejected;
      result.stats.errors.push_back({data_row, std::move(message)});
    };
    if (!split_line(rows[r], options.delimiter, fields)) {
      reject("unterminated quote");
      continue;
    }
    if (fields.size() != header.size()) {
      reject("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
      continue;
    }
    SubjectRecord record;
    record.id = fields[static_cast<std::size_t>(id_col)];
    if (record.id.empty()) {
      reject("empty subject id");
      continue;
    }
    if (ids.contains(record.id)) {
      reject("duplicate subject id '" + record.id + "'");
      continue;
    }

    bool ok = true;
    std::vector<std::string> row_missing;
    std::vector<OutOfRangeFlag> row_flags;
    for (std::size_t c = 0; c < header.size() && ok; ++c) {
      const AttributeDef* def = column_defs[c];
      if (!def) continue;
      const std::string& token = fields[c];
      if (token.empty() || def->is_missing_code(token)) {
        record.values[def->name] = Missing{};
        row_missing.push_back(def->name);
        continue;
      }
      switch (def->kind) {
        case AttributeKind::nominal:
        case AttributeKind::ordinal: {
          auto idx = def->category_index(token);
          if (!idx) {
            reject("attribute '" + def->name + "': unknown category '" + token + "'");
            ok = false;
            break;
          }
          if (def->kind == AttributeKind::nominal) {
            record.values[def->name] = CategoryIndex{*idx};
          } else {
            record.values[def->name] = OrdinalRank{*idx};
          }
          break;
        }
        case AttributeKind::scalar: {
          auto v = parse_double(token);
          if (!v) {
            reject("attribute '" + def->name + "': not a number '" + token + "'");
            ok = false;
            break;
          }
          record.values[def->name] = *v;
          if (def->valid_range && !def->valid_range->contains(*v)) {
            row_flags.push_back({data_row, record.id, def->name, *v});
          }
          break;
        }
      }
    }
    if (!ok) continue;
    // Attributes absent from the file are missing for every subject.
    for (const auto& def : dictionary.attributes()) {
      if (!record.values.contains(def.name)) {
        record.values[def.name] = Missing{};
        row_missing.push_back(def.name);
      }
    }
    for (const auto& name : row_missing) ++result.stats.missing[name];
    for (auto& f : row_flags) result.stats.out_of_range.push_back(std::move(f));
    ids.insert(record.id);
    result.cohort.subjects.push_back(std::move(record));
  }
  return result;
}

IngestResult load_cohort(const std::string& path, const DataDictionary& dictionary,
                         const CsvOptions& options) {
  return parse_cohort(read_file(path), dictionary, options);
}

std::string format_cohort(const Cohort& cohort, const CsvOptions& options) {
  std::ostringstream out;
  const char d = options.delimiter;
  out << quote_if_needed(options.id_column, d);
  for (const auto& def : cohort.dictionary.attributes()) out << d << quote_if_needed(def.name, d);
  out << '\n';
  for (const auto& s : cohort.subjects) {
    out << quote_if_needed(s.id, d);
    for (const auto& def : cohort.dictionary.attributes()) {
      out << d;
      const Value v = s.value(def.name);
      if (const auto* c = std::get_if<CategoryIndex>(&v)) {
        out << quote_if_needed(def.categories.at(static_cast<std::size_t>(c->index)), d);
      } else if (const auto* r = std::get_if<OrdinalRank>(&v)) {
        out << quote_if_needed(def.categories.at(static_cast<std::size_t>(r->rank)), d);
      } else if (const auto* x = std::get_if<double>(&v)) {
        out << format_double(*x);
      }
    }
    out << '\n';
  }
  return out.str();
}

void write_cohort(const std::string& path, const Cohort& cohort, const CsvOptions& options) {
  write_file(path, format_cohort(cohort, options));
}

json ingest_stats_to_json(const IngestStats& stats) {
  json missing = json::object();
  for (const auto& [name, n] : stats.missing) missing[name] = n;
  json flags = json::array();
  for (const auto& f : stats.out_of_range) {
    flags.push_back({{"row", f.row}, {"subject_id", f.subject_id}, {"attribute", f.attribute},
                     {"value", f.value}, {"flag", "OutOfRange"}});
  }
  json errors = json::array();
  for (const auto& e : stats.errors) errors.push_back({{"row", e.row}, {"message", e.message}});
  return json{{"rows_read", stats.rows_read},
              {"rows_rejected", stats.rows_rejected},
              {"missing", std::move(missing)},
              {"out_of_range", std::move(flags)},
              {"errors", std::move(errors)}};
}

json value_to_json(const AttributeDef& def, const Value& value) {
  if (const auto* c = std::get_if<CategoryIndex>(&value)) {
    return def.categories.at(static_cast<std::size_t>(c->index));
  }
  if (const auto* r = std::get_if<OrdinalRank>(&value)) {
    return def.categories.at(static_cast<std::size_t>(r->rank));
  }
  if (const auto* x = std::get_if<double>(&value)) return *x;
  return nullptr;
}

std::string cohort_digest(const Cohort& cohort) {
  return sha256_hex(dictionary_to_json(cohort.dictionary).dump() + "\n" + format_cohort(cohort));
}

}  // namespace cohortlab::cohort
