#pragma once

namespace medfpca {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace medfpca
