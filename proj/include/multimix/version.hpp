#pragma once

namespace multimix {
inline constexpr const char* kVersion = "0.1.0";
}
