#pragma once

#include <chrono>
#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>

namespace yieldcast::log {

enum class Level { debug, info, warn, error };

inline std::string_view level_name(Level l) {
    switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    }
    return "?";
}

using Sink = std::function<void(Level, std::string_view)>;

namespace detail {
inline std::mutex& mutex() {
    static std::mutex m;
    return m;
}
inline Sink& sink() {
    static Sink s = [](Level l, std::string_view msg) {
        if (l >= Level::info) std::cerr << "level=" << level_name(l) << ' ' << msg << '\n';
    };
    return s;
}
} // namespace detail

/// Replace the process-wide sink; returns the previous one.
inline Sink set_sink(Sink s) {
    std::lock_guard lock(detail::mutex());
    return std::exchange(detail::sink(), std::move(s));
}

/// Emit one structured line: `msg` is expected to be `key=value` pairs.
inline void write(Level l, std::string_view msg) {
    std::lock_guard lock(detail::mutex());
    if (detail::sink()) detail::sink()(l, msg);
}

inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warn(std::string_view msg) { write(Level::warn, msg); }
inline void debug(std::string_view msg) { write(Level::debug, msg); }

/// Logs `stage=<name> elapsed_ms=<t>` when destroyed.
class StageTimer {
public:
    explicit StageTimer(std::string stage) : stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
        info("event=stage_start stage=" + stage_);
    }
    ~StageTimer() {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
        info("event=stage_end stage=" + stage_ + " elapsed_ms=" + std::to_string(ms));
    }
    StageTimer(const StageTimer&) = delete;
    StageTimer& operator=(const StageTimer&) = delete;

private:
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace yieldcast::log
