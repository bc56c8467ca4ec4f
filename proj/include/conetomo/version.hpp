#pragma once

namespace conetomo {

inline constexpr const char* library_version = "0.1.0";
inline constexpr int container_schema_version = 1;

}  // namespace conetomo
