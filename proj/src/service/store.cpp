#include "cohortlab/service/store.hpp"

#include <sqlite3.h>

#include <functional>

#include "cohortlab/error.hpp"

namespace cohortlab::service {

namespace {

struct Statement {
  sqlite3_stmt* stmt = nullptr;
  Statement(sqlite3* db, const char* sql) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt, nullptr) != SQLITE_OK) {
      throw Error(ErrorCode::io_error, std::string("sqlite prepare: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  void bind(int i, const std::string& v) { sqlite3_bind_text(stmt, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT); }
  void bind(int i, std::int64_t v) { sqlite3_bind_int64(stmt, i, v); }
  std::string text(int i) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt, i));
    return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt, i))) : std::string();
  }
};

void run(sqlite3* db, Statement& s) {
  if (sqlite3_step(s.stmt) != SQLITE_DONE) {
    throw Error(ErrorCode::io_error, std::string("sqlite step: ") + sqlite3_errmsg(db));
  }
}

void each_row(sqlite3* db, Statement& s, const std::function<void()>& f) {
  for (;;) {
    const int rc = sqlite3_step(s.stmt);
    if (rc == SQLITE_DONE) return;
    if (rc != SQLITE_ROW) throw Error(ErrorCode::io_error, std::string("sqlite step: ") + sqlite3_errmsg(db));
    f();
  }
}

}  // namespace

Store::Store(const std::string& path) : path_(path) {
  if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw Error(ErrorCode::io_error, "cannot open store " + path + ": " + msg);
  }
  exec("PRAGMA journal_mode=WAL");
  exec(
      "CREATE TABLE IF NOT EXISTS cohorts(id TEXT PRIMARY KEY, name TEXT, dictionary TEXT, csv TEXT, digest TEXT, "
      "ingest_stats TEXT, centerlines TEXT);"
      "CREATE TABLE IF NOT EXISTS sessions(id TEXT PRIMARY KEY, cohort_id TEXT, created TEXT);"
      "CREATE TABLE IF NOT EXISTS selections(session_id TEXT, name TEXT, predicates TEXT, "
      "PRIMARY KEY(session_id, name));"
      "CREATE TABLE IF NOT EXISTS runs(id TEXT PRIMARY KEY, session_id TEXT, report TEXT);"
      "CREATE TABLE IF NOT EXISTS provenance(session_id TEXT, sequence INTEGER, entry TEXT, "
      "PRIMARY KEY(session_id, sequence));");
}

Store::~Store() { sqlite3_close(db_); }

void Store::exec(const std::string& sql) {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    const std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw Error(ErrorCode::io_error, "sqlite: " + msg);
  }
}

void Store::put_cohort(const StoredCohort& c) {
  Statement s(db_, "INSERT OR REPLACE INTO cohorts VALUES(?,?,?,?,?,?,?)");
  s.bind(1, c.id);
  s.bind(2, c.name);
  s.bind(3, c.dictionary_json);
  s.bind(4, c.csv);
  s.bind(5, c.digest);
  s.bind(6, c.ingest_stats_json);
  s.bind(7, c.centerlines_csv);
  run(db_, s);
}

void Store::put_session(const StoredSession& x) {
  Statement s(db_, "INSERT OR REPLACE INTO sessions VALUES(?,?,?)");
  s.bind(1, x.id);
  s.bind(2, x.cohort_id);
  s.bind(3, x.created);
  run(db_, s);
}

void Store::put_selection(const StoredSelection& x) {
  Statement s(db_, "INSERT OR REPLACE INTO selections VALUES(?,?,?)");
  s.bind(1, x.session_id);
  s.bind(2, x.name);
  s.bind(3, x.predicates_json);
  run(db_, s);
}

void Store::put_run(const StoredRun& r) {
  Statement s(db_, "INSERT OR REPLACE INTO runs VALUES(?,?,?)");
  s.bind(1, r.id);
  s.bind(2, r.session_id);
  s.bind(3, r.report_json);
  run(db_, s);
}

void Store::append_provenance(const StoredProvenance& p) {
  Statement s(db_, "INSERT INTO provenance VALUES(?,?,?)");
  s.bind(1, p.session_id);
  s.bind(2, static_cast<std::int64_t>(p.sequence));
  s.bind(3, p.entry_json);
  run(db_, s);
}

std::vector<StoredCohort> Store::cohorts() const {
  Statement s(db_, "SELECT id, name, dictionary, csv, digest, ingest_stats, centerlines FROM cohorts ORDER BY id");
  std::vector<StoredCohort> out;
  each_row(db_, s, [&] { out.push_back({s.text(0), s.text(1), s.text(2), s.text(3), s.text(4), s.text(5), s.text(6)}); });
  return out;
}

std::vector<StoredSession> Store::sessions() const {
  Statement s(db_, "SELECT id, cohort_id, created FROM sessions ORDER BY id");
  std::vector<StoredSession> out;
  each_row(db_, s, [&] { out.push_back({s.text(0), s.text(1), s.text(2)}); });
  return out;
}

std::vector<StoredSelection> Store::selections() const {
  Statement s(db_, "SELECT session_id, name, predicates FROM selections ORDER BY session_id, name");
  std::vector<StoredSelection> out;
  each_row(db_, s, [&] { out.push_back({s.text(0), s.text(1), s.text(2)}); });
  return out;
}

std::vector<StoredRun> Store::runs() const {
  Statement s(db_, "SELECT id, session_id, report FROM runs ORDER BY id");
  std::vector<StoredRun> out;
  each_row(db_, s, [&] { out.push_back({s.text(0), s.text(1), s.text(2)}); });
  return out;
}

std::vector<StoredProvenance> Store::provenance() const {
  Statement s(db_, "SELECT session_id, sequence, entry FROM provenance ORDER BY session_id, sequence");
  std::vector<StoredProvenance> out;
  each_row(db_, s, [&] {
    out.push_back({s.text(0), static_cast<std::uint64_t>(sqlite3_column_int64(s.stmt, 1)), s.text(2)});
  });
  return out;
}

}  // namespace cohortlab::service
