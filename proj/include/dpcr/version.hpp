#pragma once

namespace dpcr {
inline constexpr const char* kVersion = "0.1.0";
}
