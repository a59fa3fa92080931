#pragma once

namespace pmap {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pmap
