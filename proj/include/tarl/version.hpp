#pragma once

namespace tarl {

inline constexpr const char* kVersion = "0.1.0";

}
