#pragma once

namespace stratcomm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace stratcomm
