#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace sigat {

// Runs the sigat command line. `args` excludes the program name. Returns the
// process exit code: 0 on success, otherwise the ErrorCode value of the
// failure (CLI usage errors map to invalid_config).
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace sigat
