#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace gcp::cli {

// Runs one pipeline stage. `args` excludes the program name. The one-line
// JSON summary goes to `out`, diagnostics and usage to `err`.
int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace gcp::cli
