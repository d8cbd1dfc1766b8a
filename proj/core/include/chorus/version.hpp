#pragma once

namespace chorus {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace chorus
