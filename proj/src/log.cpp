#include "albumgan/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace albumgan::logging {

namespace {

std::atomic<Level> g_level{Level::info};
std::mutex g_mutex;
Sink g_sink;

const char* tag(Level l) {
    switch (l) {
        case Level::debug:
            return "debug";
        case Level::info:
            return "info";
        case Level::warn:
            return "warning";
        case Level::error:
            return "error";
        case Level::quiet:
            break;
    }
    return "";
}

}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void set_sink(Sink sink) {
    std::lock_guard lock(g_mutex);
    g_sink = std::move(sink);
}

void write(Level l, const std::string& message) {
    if (l < g_level.load()) return;
    std::lock_guard lock(g_mutex);
    if (g_sink) {
        g_sink(l, message);
        return;
    }
    std::fprintf(stderr, "[%s] %s\n", tag(l), message.c_str());
}

}  // namespace albumgan::logging
