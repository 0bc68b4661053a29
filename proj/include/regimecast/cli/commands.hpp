#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace regimecast {

/// Exit codes: 0 success, 1 IO or data error, 2 config error, 3 training
/// infeasible.
int exit_code_for(const std::exception& e);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace regimecast
