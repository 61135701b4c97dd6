#pragma once

namespace doaopt {

inline constexpr const char* kToolName = "doaopt";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace doaopt
