#pragma once

namespace zoomlab {
inline constexpr const char* kVersion = "0.1.0";
}
