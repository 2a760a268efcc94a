#pragma once

#include <functional>
#include <string_view>

namespace gratis {

/// Warnings go to stderr unless a sink is installed (tests capture them).
void log_warning(std::string_view message);
void set_warning_sink(std::function<void(std::string_view)> sink);

}  // namespace gratis
