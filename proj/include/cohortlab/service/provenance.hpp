#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace cohortlab::service {

struct ProvenanceEntry {
  std::uint64_t sequence = 0;
  std::string timestamp;  // UTC, excluded from digests
  std::string operation;
  nlohmann::json params;
  nlohmann::json input_digests;  // name -> digest
  std::string output_digest;
};

nlohmann::json entry_to_json(const ProvenanceEntry& e);
ProvenanceEntry entry_from_json(const nlohmann::json& j);

std::string utc_now();

/// Append-only log with gap-free sequence numbers starting at 1.
class ProvenanceLog {
 public:
  const ProvenanceEntry& append(std::string operation, nlohmann::json params, nlohmann::json input_digests,
                                std::string output_digest);
  /// Restores a persisted entry; throws Error(invalid_argument) if its sequence is not next.
  void restore(ProvenanceEntry e);
  const std::vector<ProvenanceEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<ProvenanceEntry> entries_;
};

}  // namespace cohortlab::service
