#pragma once

#include <utility>

#include <spdlog/spdlog.h>

namespace sbridge::log {

/// Library logger writing to stderr. The level comes from PB_LOG
/// (trace, debug, info, warn, error, off) and defaults to warn.
spdlog::logger& logger();

template <typename... Args>
void trace(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().trace(fmt, std::forward<Args>(args)...);
}
template <typename... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().debug(fmt, std::forward<Args>(args)...);
}
template <typename... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().info(fmt, std::forward<Args>(args)...);
}
template <typename... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().warn(fmt, std::forward<Args>(args)...);
}

}  // namespace sbridge::log
