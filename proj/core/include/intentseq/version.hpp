#pragma once

namespace intentseq {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace intentseq
