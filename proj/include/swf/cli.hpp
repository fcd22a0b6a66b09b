#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "swf/config.hpp"

namespace swf {

/// Exit codes of the `swf` tool.
enum ExitCode : int { kExitOk = 0, kExitUser = 1, kExitInternal = 2 };

/// Reads a config file, applies `--set` assignments in order and validates
/// the result. Relative data paths are resolved against the config file's
/// directory so that the snapshot is usable from anywhere.
nlohmann::json resolve_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

/// Runs one `swf` invocation. Progress goes to `out`, diagnostics to `err`.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace swf
