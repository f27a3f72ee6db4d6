#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace amdp::cli {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Level comes from AMDP_MIRROR_LOG in {error, info, debug}; default error.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("AMDP_MIRROR_LOG");
        if (!env) return LogLevel::error;
        const std::string value(env);
        if (value == "debug") return LogLevel::debug;
        if (value == "info") return LogLevel::info;
        return LogLevel::error;
    }();
    return level;
}

inline void log_error(const std::string& msg) { std::cerr << "[error] " << msg << '\n'; }

inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) std::cerr << "[info] " << msg << '\n';
}

inline void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug) std::cerr << "[debug] " << msg << '\n';
}

} // namespace amdp::cli
