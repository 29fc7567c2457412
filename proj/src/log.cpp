#include "powertalk/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>

namespace powertalk {

namespace {

// Diagnostics go to stderr so tables on stdout stay machine readable.
spdlog::logger& logger() {
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto l = std::make_shared<spdlog::logger>("powertalk", std::make_shared<spdlog::sinks::stderr_color_sink_mt>());
        l->set_level(spdlog::level::warn);
        l->set_pattern("[%l] %v");
        return l;
    }();
    return *instance;
}

}  // namespace

void configure_logging_from_env() {
    const char* level = std::getenv("POWERTALK_LOG");
    if (level == nullptr) return;
    logger().set_level(spdlog::level::from_str(level));
}

void log_debug(const std::string& message) { logger().debug(message); }
void log_info(const std::string& message) { logger().info(message); }
void log_warn(const std::string& message) { logger().warn(message); }

}  // namespace powertalk
