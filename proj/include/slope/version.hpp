#pragma once

#define SLOPE_VERSION_STRING "1.0.0"

namespace slope {

inline constexpr const char* version = SLOPE_VERSION_STRING;

}  // namespace slope
