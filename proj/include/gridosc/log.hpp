#pragma once

#include <string_view>

namespace gridosc::log {

// Diagnostics go to stderr. Verbosity comes from the OSC_LOG environment
// variable (trace, debug, info, warn, error, off); default is warn.
void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

}  // namespace gridosc::log
