#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mlhat {

/// Entry point of the `mlhat` tool; args exclude the program name.
/// Returns the process exit code; diagnostics go to `err`.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mlhat
