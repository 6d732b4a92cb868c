#pragma once

namespace cgleval {

inline constexpr const char* kVersion = "0.1.0";

} // namespace cgleval
