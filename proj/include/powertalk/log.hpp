#pragma once

#include <string>

namespace powertalk {

/// Reads POWERTALK_LOG (trace, debug, info, warn, error, off) and applies it
/// to the library logger. Unset means warn.
void configure_logging_from_env();

void log_debug(const std::string& message);
void log_info(const std::string& message);
void log_warn(const std::string& message);

}  // namespace powertalk
