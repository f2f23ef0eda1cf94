#pragma once

namespace maxdiff {

inline constexpr const char* kToolName = "maxdiff";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace maxdiff
