#pragma once

#include <string>

namespace adsr {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Level from the ADSR_LOG environment variable (error|warn|info|debug),
/// default warn.
LogLevel log_level();
void set_log_level(LogLevel level);

void log(LogLevel level, const std::string& msg);

inline void log_error(const std::string& m) { log(LogLevel::Error, m); }
inline void log_warn(const std::string& m) { log(LogLevel::Warn, m); }
inline void log_info(const std::string& m) { log(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log(LogLevel::Debug, m); }

}  // namespace adsr
