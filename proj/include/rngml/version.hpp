#pragma once

namespace rngml {

inline constexpr const char* kToolVersion = "0.1.0";

} // namespace rngml
