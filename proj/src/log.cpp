#include "qsd/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace qsd {

namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& current_handler() {
  static WarningHandler h = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return h;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(handler_mutex());
  return std::exchange(current_handler(), std::move(handler));
}

void warn(const std::string& message) {
  std::lock_guard lock(handler_mutex());
  if (current_handler()) current_handler()(message);
}

}  // namespace qsd
