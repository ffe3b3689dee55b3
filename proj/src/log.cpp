#include "clip/log.hpp"

#include <cstdlib>
#include <iostream>

namespace clip {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("CLIP_LOG");
    return (env != nullptr && std::string(env) == "debug") ? LogLevel::kDebug
                                                           : LogLevel::kInfo;
  }();
  return level;
}

void log_info(const std::string& message) {
  std::cerr << "[clip] " << message << "\n";
}

void log_debug(const std::string& message) {
  if (log_level() == LogLevel::kDebug) {
    std::cerr << "[clip:debug] " << message << "\n";
  }
}

}  // namespace clip
