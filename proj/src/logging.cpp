#include "logging.hpp"

#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_sinks.h>

namespace sbridge::log {

spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_st>();
    auto made = std::make_shared<spdlog::logger>("sbridge", sink);
    made->set_pattern("[%l] %v");
    const char* env = std::getenv("PB_LOG");
    made->set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::warn);
    return made;
  }();
  return *instance;
}

}  // namespace sbridge::log
