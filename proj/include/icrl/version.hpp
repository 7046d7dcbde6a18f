#pragma once

namespace icrl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace icrl
