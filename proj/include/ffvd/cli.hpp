#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ffvd::cli {

/// Run the command line with argv[0] omitted. Returns the process exit code:
/// 0 success, 1 usage, 2 data, 3 numerical.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ffvd::cli
