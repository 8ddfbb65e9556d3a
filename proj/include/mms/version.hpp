#pragma once

namespace mms {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mms
