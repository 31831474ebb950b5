#include "ffvd/diagnostics.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ffvd::diagnostics {
namespace {

std::mutex sink_mutex;
Sink current_sink;
std::atomic<long> count{0};

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex);
  Sink previous = std::move(current_sink);
  current_sink = std::move(sink);
  return previous;
}

void warn(const std::string& message) {
  ++count;
  std::lock_guard lock(sink_mutex);
  if (current_sink) {
    current_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

long warning_count() { return count.load(); }

}  // namespace ffvd::diagnostics
