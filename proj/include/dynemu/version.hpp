#pragma once

namespace dynemu {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace dynemu
