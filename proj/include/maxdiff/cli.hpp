#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace maxdiff::cli {

// Runs one command line (args[0] is the program name). Returns 0 on success,
// 1 on a domain error (one JSON line on `err`), 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace maxdiff::cli
