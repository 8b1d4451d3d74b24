#pragma once

namespace qnet {

inline constexpr const char* kToolName = "qnet";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace qnet
