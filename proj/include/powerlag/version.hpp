#pragma once

namespace powerlag {

inline constexpr const char *kVersion = "0.1.0";

} // namespace powerlag
