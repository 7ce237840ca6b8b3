#pragma once

#include "cbo_cli/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cbo::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

/// Entry point shared by the `cbo` binary and the tests. Results go to
/// --out (or `out`), the resolved config and diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Overrides& env);

}  // namespace cbo::cli
