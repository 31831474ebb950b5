#pragma once

#include <functional>
#include <string>

namespace ffvd::diagnostics {

using Sink = std::function<void(const std::string&)>;

/// Install a sink for numerical-health warnings. Passing an empty function
/// restores the default, which writes to stderr. Returns the previous sink.
Sink set_sink(Sink sink);

void warn(const std::string& message);

/// Number of warnings emitted since process start.
long warning_count();

}  // namespace ffvd::diagnostics
