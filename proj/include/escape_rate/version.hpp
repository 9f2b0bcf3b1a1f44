#pragma once

namespace escape_rate {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace escape_rate
