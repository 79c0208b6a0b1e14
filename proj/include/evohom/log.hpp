#pragma once

#include <string_view>

namespace evohom {

enum class LogLevel { quiet, warning, info };

void set_log_level(LogLevel level);
LogLevel log_level();

// Messages go to stderr, prefixed with their level.
void log_warning(std::string_view message);
void log_info(std::string_view message);

} // namespace evohom
