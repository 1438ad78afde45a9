#ifndef GRAPHFIT_CLI_HPP
#define GRAPHFIT_CLI_HPP

#include <string>
#include <vector>

namespace graphfit::cli {

/// Entry point behind the `graphfit` binary. args excludes the program
/// name. Returns 0 on success; prints a diagnostic and returns nonzero on
/// any error.
int run_cli(const std::vector<std::string>& args);

}  // namespace graphfit::cli

#endif  // GRAPHFIT_CLI_HPP
