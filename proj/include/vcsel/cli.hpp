#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vcsel {

/// Runs one command line (without the program name). Exit codes:
/// 0 success, 1 numeric failure, 2 I/O, 3 schema or validation.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vcsel
