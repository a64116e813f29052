#include "usat/common.hpp"

#include <iostream>
#include <mutex>

namespace usat {
namespace {

std::mutex g_sink_mutex;
WarningSink g_sink;
thread_local bool t_silenced = false;

}  // namespace

void warn(std::string_view message) {
  if (t_silenced) return;
  std::lock_guard lock(g_sink_mutex);
  if (g_sink) {
    g_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(g_sink_mutex);
  std::swap(g_sink, sink);
  return sink;
}

ScopedWarningSilencer::ScopedWarningSilencer() : previous_(t_silenced) { t_silenced = true; }
ScopedWarningSilencer::~ScopedWarningSilencer() { t_silenced = previous_; }

}  // namespace usat
