#pragma once

namespace smyrf {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace smyrf
