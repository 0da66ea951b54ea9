#pragma once

#include <sstream>
#include <string>

namespace monoflow {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Current level, read once from the MONOFLOW_LOG environment variable
/// (one of "error", "info", "debug"; default "error").
LogLevel log_level();

void log_message(LogLevel level, const std::string& msg);

namespace detail {
template <typename... Args>
std::string log_format(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}
} // namespace detail

template <typename... Args>
void log_info(Args&&... args) {
    if (log_level() >= LogLevel::Info)
        log_message(LogLevel::Info, detail::log_format(std::forward<Args>(args)...));
}

template <typename... Args>
void log_debug(Args&&... args) {
    if (log_level() >= LogLevel::Debug)
        log_message(LogLevel::Debug, detail::log_format(std::forward<Args>(args)...));
}

template <typename... Args>
void log_error(Args&&... args) {
    log_message(LogLevel::Error, detail::log_format(std::forward<Args>(args)...));
}

} // namespace monoflow
