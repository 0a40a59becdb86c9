#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cohortlab {

enum class ErrorCode {
  parse_error,
  io_error,
  invalid_argument,
  duplicate_attribute,
  invalid_attribute,
  unknown_attribute,
  degenerate_element,
  invalid_elasticity,
  eigen_failure,
  empty_input,
  zero_margin,
  empty_selection,
  incompatible_predicate,
  unknown_estimator,
  not_found,
  digest_mismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cohortlab
