#pragma once

namespace nilwalk {

inline constexpr const char* kVersion = "0.1.0";

} // namespace nilwalk
