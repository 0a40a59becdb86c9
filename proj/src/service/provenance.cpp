#include "cohortlab/service/provenance.hpp"

#include <chrono>
#include <ctime>

#include "cohortlab/error.hpp"

namespace cohortlab::service {

using nlohmann::json;

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  const auto len = std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  std::snprintf(buf + len, sizeof(buf) - len, ".%03dZ", static_cast<int>(ms));
  return buf;
}

json entry_to_json(const ProvenanceEntry& e) {
  return json{{"sequence", e.sequence},         {"timestamp", e.timestamp},
              {"operation", e.operation},       {"params", e.params},
              {"input_digests", e.input_digests}, {"output_digest", e.output_digest}};
}

ProvenanceEntry entry_from_json(const json& j) {
  ProvenanceEntry e;
  try {
    e.sequence = j.at("sequence").get<std::uint64_t>();
    e.timestamp = j.value("timestamp", std::string());
    e.operation = j.at("operation").get<std::string>();
    e.params = j.at("params");
    e.input_digests = j.at("input_digests");
    e.output_digest = j.at("output_digest").get<std::string>();
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::parse_error, std::string("provenance entry: ") + ex.what());
  }
  return e;
}

const ProvenanceEntry& ProvenanceLog::append(std::string operation, json params, json input_digests,
                                             std::string output_digest) {
  ProvenanceEntry e;
  e.sequence = entries_.size() + 1;
  e.timestamp = utc_now();
  e.operation = std::move(operation);
  e.params = std::move(params);
  e.input_digests = std::move(input_digests);
  e.output_digest = std::move(output_digest);
  entries_.push_back(std::move(e));
  return entries_.back();
}

void ProvenanceLog::restore(ProvenanceEntry e) {
  if (e.sequence != entries_.size() + 1) {
    throw Error(ErrorCode::invalid_argument, "provenance sequence gap at " + std::to_string(e.sequence));
  }
  entries_.push_back(std::move(e));
}

}  // namespace cohortlab::service
