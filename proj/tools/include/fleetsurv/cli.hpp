#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fleetsurv::cli {

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 on usage errors, 2 on data errors and 3 on numerical failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace fleetsurv::cli
