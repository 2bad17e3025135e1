#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dsas::cli {

// Runs the `dsas` command line with `args` (program name excluded). Returns
// the process exit code; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dsas::cli
