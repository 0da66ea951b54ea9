#include "monoflow/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace monoflow {

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("MONOFLOW_LOG");
        if (!env) return LogLevel::Error;
        std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        return LogLevel::Error;
    }();
    return level;
}

void log_message(LogLevel level, const std::string& msg) {
    static std::mutex mtx;
    const char* tag = level == LogLevel::Debug ? "debug"
                    : level == LogLevel::Info  ? "info"
                                               : "error";
    std::lock_guard<std::mutex> lock(mtx);
    std::cerr << "[monoflow:" << tag << "] " << msg << "\n";
}

} // namespace monoflow
