#pragma once

namespace cmv {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kResultFormatVersion = 1;

}  // namespace cmv
