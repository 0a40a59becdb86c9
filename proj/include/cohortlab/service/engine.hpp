#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cohortlab/cohort/io.hpp"
#include "cohortlab/cohort/predicate.hpp"
#include "cohortlab/mixed/run.hpp"
#include "cohortlab/service/provenance.hpp"
#include "cohortlab/service/store.hpp"
#include "cohortlab/shape/centerline.hpp"
#include "json.hpp"

namespace cohortlab::service {

/// File names used for data digests in archives.
inline constexpr const char* kDictionaryFile = "dictionary.json";
inline constexpr const char* kCohortFile = "cohort.csv";
inline constexpr const char* kCenterlinesFile = "centerlines.csv";
inline constexpr const char* kArchiveFormat = "cohortlab-session-archive";

struct LoadedCohort {
  std::string id;
  std::string name;
  cohort::Cohort cohort;
  nlohmann::json ingest_stats;
  std::vector<shape::Centerline> centerlines;  // sorted by subject id
  std::string digest;
  std::map<std::string, std::string, std::less<>> file_digests;  // file name -> sha256
};

/// Session-level API shared by the HTTP service and the CLI. Every
/// state-changing call appends exactly one provenance entry. Calls on
/// different sessions run concurrently; calls on one session are serialized.
class Engine {
 public:
  /// ":memory:" for a transient store; a file path persists and rehydrates.
  explicit Engine(const std::string& store_path = ":memory:");
  ~Engine();

  /// {"name"?, "dictionary": {...}, "csv": "...", "centerlines_csv"?: "..."} or
  /// {"name"?, "synthetic": {"spec": {...}, "seed": n}}. Re-ingesting identical
  /// data returns the existing cohort id.
  nlohmann::json ingest(const nlohmann::json& request);
  nlohmann::json attributes(const std::string& cohort_id) const;
  std::shared_ptr<const LoadedCohort> cohort(const std::string& cohort_id) const;

  nlohmann::json create_session(const std::string& cohort_id);
  /// Conjunction of predicates stored under `name` and made current.
  nlohmann::json apply_selection(const std::string& session_id, const std::string& name,
                                 const nlohmann::json& predicates);
  /// {"algorithm", "params", "selection"?}; runs over the current selection.
  nlohmann::json run_clustering(const std::string& session_id, const nlohmann::json& request);
  nlohmann::json run_report(const std::string& run_id) const;
  nlohmann::json query_stats(const std::string& session_id, const std::string& estimator,
                             const nlohmann::json& params, const std::string& selection = {});
  nlohmann::json view(const std::string& session_id, const std::string& view, const nlohmann::json& params,
                      const std::string& selection = {});

  nlohmann::json provenance(const std::string& session_id) const;
  nlohmann::json export_session(const std::string& session_id) const;
  /// Re-executes the archive on a new session over `cohort_id` (default: the
  /// archived cohort id). Throws Error(digest_mismatch) naming the data file or
  /// the provenance entry that diverged; nothing after the divergence runs.
  nlohmann::json replay(const nlohmann::json& archive, const std::string& cohort_id = {});

  std::vector<std::string> session_ids() const;

 private:
  struct Session;
  std::shared_ptr<Session> session(const std::string& id) const;
  std::shared_ptr<const LoadedCohort> add_cohort(LoadedCohort c, bool persist);
  void rehydrate();
  void persist_entry(const std::string& session_id, const ProvenanceEntry& e);

  nlohmann::json do_create_session(const std::string& cohort_id);
  nlohmann::json do_selection(Session& s, const std::string& name, const nlohmann::json& predicates, bool log);
  nlohmann::json do_run(Session& s, const nlohmann::json& request, bool log);
  nlohmann::json do_stats(Session& s, const std::string& estimator, const nlohmann::json& params,
                          const std::string& selection, bool log);

  mutable std::shared_mutex mutex_;  // guards the maps below
  std::map<std::string, std::shared_ptr<const LoadedCohort>, std::less<>> cohorts_;
  std::map<std::string, std::shared_ptr<Session>, std::less<>> sessions_;
  std::map<std::string, std::shared_ptr<const mixed::ClusterRun>, std::less<>> runs_;
  std::map<std::string, nlohmann::json, std::less<>> reports_;
  std::uint64_t next_session_ = 1;
  mutable std::mutex store_mutex_;
  std::unique_ptr<Store> store_;
};

/// Digest of an evaluate_estimator() result. Echoed parameters stay out
/// because they may hold session-local run ids.
std::string stats_output_digest(const std::string& estimator, const nlohmann::json& evaluated);

/// Digest of a selection outcome: {name, count, ids}.
std::string selection_digest(const std::string& name, const std::vector<std::string>& ids);

}  // namespace cohortlab::service
