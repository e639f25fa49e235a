#pragma once

namespace gqakit {

inline constexpr const char* kVersion = "0.1.0";

} // namespace gqakit
