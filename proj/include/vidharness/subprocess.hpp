#pragma once

#include <map>
#include <string>
#include <vector>

namespace vidharness {

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs argv[0] (PATH lookup) with the given arguments, no shell involved.
/// Captures stdout and stderr. Throws ToolFailure if the process cannot be
/// spawned.
CommandResult run_command(const std::vector<std::string>& argv);

/// Splits a whitespace-separated command template into argv and replaces
/// every `{name}` placeholder inside each argument.  Unknown placeholders
/// are left untouched.
std::vector<std::string> expand_command(
    const std::string& command_template,
    const std::map<std::string, std::string>& values);

}  // namespace vidharness
