#pragma once

#include <string>
#include <vector>

namespace nsqmc {

/// Subcommands: kl, cbc, run, rates. Exit codes: 0 success, 2 configuration
/// error, 3 numerical failure.
int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, const char* const* argv);

} // namespace nsqmc
