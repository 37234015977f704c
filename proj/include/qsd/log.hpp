#pragma once

#include <functional>
#include <string>

namespace qsd {

using WarningHandler = std::function<void(const std::string&)>;

/// Replaces the process-wide warning sink (default: stderr). Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);

/// Emits a non-fatal diagnostic through the current handler.
void warn(const std::string& message);

}  // namespace qsd
