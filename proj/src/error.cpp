#include "cohortlab/error.hpp"

namespace cohortlab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::duplicate_attribute: return "DuplicateAttribute";
    case ErrorCode::invalid_attribute: return "InvalidAttribute";
    case ErrorCode::unknown_attribute: return "UnknownAttribute";
    case ErrorCode::degenerate_element: return "DegenerateElement";
    case ErrorCode::invalid_elasticity: return "InvalidElasticity";
    case ErrorCode::eigen_failure: return "EigenFailure";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::zero_margin: return "ZeroMargin";
    case ErrorCode::empty_selection: return "EmptySelection";
    case ErrorCode::incompatible_predicate: return "IncompatiblePredicate";
    case ErrorCode::unknown_estimator: return "UnknownEstimator";
    case ErrorCode::not_found: return "NotFound";
    case ErrorCode::digest_mismatch: return "DigestMismatch";
  }
  return "Unknown";
}

}  // namespace cohortlab
