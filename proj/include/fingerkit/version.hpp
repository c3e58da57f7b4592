#pragma once

namespace fingerkit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fingerkit
