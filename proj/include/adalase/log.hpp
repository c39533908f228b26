#pragma once

#include <functional>
#include <string>

namespace adalase {

using WarningHandler = std::function<void(const std::string&)>;

/// Writes "warning: <message>" to stderr unless a handler is installed.
void warn(const std::string& message);

/// Replaces the warning handler; an empty handler restores stderr output.
/// Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);

}  // namespace adalase
