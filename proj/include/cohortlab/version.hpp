#pragma once

namespace cohortlab {

inline constexpr const char* kEngineName = "cohortlab";
inline constexpr const char* kEngineVersion = "1.0.0";

}  // namespace cohortlab
