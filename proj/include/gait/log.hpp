#pragma once

#include <string>

namespace gait {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

// Level is read once from GAITGRAPH_LOG (debug|info|warn|error); default info.
LogLevel log_level();
void set_log_level(LogLevel lvl);

void log_msg(LogLevel lvl, const std::string& msg);

inline void log_debug(const std::string& msg) { log_msg(LogLevel::Debug, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log_msg(LogLevel::Warn, msg); }
inline void log_error(const std::string& msg) { log_msg(LogLevel::Error, msg); }

}  // namespace gait
