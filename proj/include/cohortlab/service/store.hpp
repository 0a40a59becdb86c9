#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

struct sqlite3;

namespace cohortlab::service {

struct StoredCohort {
  std::string id;
  std::string name;
  std::string dictionary_json;
  std::string csv;
  std::string digest;
  std::string ingest_stats_json;
  std::string centerlines_csv;
};

struct StoredSession {
  std::string id;
  std::string cohort_id;
  std::string created;
};

struct StoredSelection {
  std::string session_id;
  std::string name;
  std::string predicates_json;
};

struct StoredRun {
  std::string id;
  std::string session_id;
  std::string report_json;
};

struct StoredProvenance {
  std::string session_id;
  std::uint64_t sequence = 0;
  std::string entry_json;
};

/// Single-file SQLite persistence for cohorts, sessions, selections, runs and
/// provenance. ":memory:" keeps everything in RAM. Not thread-safe by itself.
class Store {
 public:
  explicit Store(const std::string& path);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  void put_cohort(const StoredCohort& c);
  void put_session(const StoredSession& s);
  void put_selection(const StoredSelection& s);
  void put_run(const StoredRun& r);
  /// Insert only; a duplicate (session, sequence) throws Error(io_error).
  void append_provenance(const StoredProvenance& p);

  std::vector<StoredCohort> cohorts() const;
  std::vector<StoredSession> sessions() const;
  std::vector<StoredSelection> selections() const;
  std::vector<StoredRun> runs() const;
  std::vector<StoredProvenance> provenance() const;  // ordered by session, sequence

  const std::string& path() const noexcept { return path_; }

 private:
  void exec(const std::string& sql);
  std::string path_;
  sqlite3* db_ = nullptr;
};

}  // namespace cohortlab::service
