#pragma once

namespace spinjump {
inline constexpr const char* kToolName = "spinjump";
inline constexpr const char* kToolVersion = "0.1.0";
}  // namespace spinjump
