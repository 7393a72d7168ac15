#pragma once

#include <string>

namespace rsmi {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Level comes from the RSMI_LOG environment variable (error|info|debug),
// default info. Messages go to stderr only.
LogLevel log_level();
void log_message(LogLevel level, const std::string& msg);

inline void log_error(const std::string& msg) { log_message(LogLevel::kError, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::kInfo, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::kDebug, msg); }

}  // namespace rsmi
