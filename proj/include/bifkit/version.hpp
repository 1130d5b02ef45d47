#pragma once

namespace bifkit {

inline constexpr const char* version = "0.1.0";

}  // namespace bifkit
