#pragma once

#include <string>
#include <vector>

namespace crashsev::cli {

// Entry point for the command-line front end; `args` excludes the program
// name. Exit codes: 0 success, 2 data error, 3 training divergence,
// 4 checkpoint/schema mismatch, 5 lookup failure, 6 config error,
// 1 anything else.
int run_cli(std::vector<std::string> args);

}  // namespace crashsev::cli
