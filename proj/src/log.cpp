#include "gratis/log.hpp"

#include <mutex>

#include <fmt/core.h>

namespace gratis {
namespace {
std::mutex g_mu;
std::function<void(std::string_view)> g_sink;
}  // namespace

void log_warning(std::string_view message) {
  std::lock_guard lock(g_mu);
  if (g_sink) {
    g_sink(message);
  } else {
    fmt::print(stderr, "warning: {}\n", message);
  }
}

void set_warning_sink(std::function<void(std::string_view)> sink) {
  std::lock_guard lock(g_mu);
  g_sink = std::move(sink);
}

}  // namespace gratis
