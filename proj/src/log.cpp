#include "gait/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace gait {

namespace {

LogLevel parse_env_level() {
    const char* env = std::getenv("GAITGRAPH_LOG");
    if (env == nullptr) return LogLevel::Info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    if (std::strcmp(env, "info") == 0) return LogLevel::Info;
    if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::Error;
    return LogLevel::Info;
}

LogLevel& level_ref() {
    static LogLevel lvl = parse_env_level();
    return lvl;
}

const char* level_name(LogLevel lvl) {
    switch (lvl) {
        case LogLevel::Debug: return "debug";
        case LogLevel::Info: return "info";
        case LogLevel::Warn: return "warn";
        case LogLevel::Error: return "error";
    }
    return "?";
}

}  // namespace

LogLevel log_level() { return level_ref(); }

void set_log_level(LogLevel lvl) { level_ref() = lvl; }

void log_msg(LogLevel lvl, const std::string& msg) {
    if (static_cast<int>(lvl) < static_cast<int>(level_ref())) return;
    std::fprintf(stderr, "[%s] %s\n", level_name(lvl), msg.c_str());
}

}  // namespace gait
