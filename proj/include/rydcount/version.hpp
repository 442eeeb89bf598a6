#pragma once

namespace rydcount {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rydcount
