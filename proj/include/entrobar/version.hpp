#pragma once

namespace entrobar {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace entrobar
