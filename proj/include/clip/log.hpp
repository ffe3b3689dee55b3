#pragma once

#include <string>

namespace clip {

// Verbosity comes from the CLIP_LOG environment variable: "debug" enables
// both levels, "info" (or anything else, or unset) only info. Messages go
// to stderr so they never disturb machine-readable stdout.
enum class LogLevel { kInfo, kDebug };

LogLevel log_level();
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace clip
