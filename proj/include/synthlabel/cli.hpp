#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace synthlabel {

/// Entry point of the `synthlabel` tool. Returns the process exit code.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace synthlabel
