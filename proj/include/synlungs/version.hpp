#pragma once

namespace synlungs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace synlungs
