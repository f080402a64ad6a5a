// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Kept in a library so tests can drive it in-process.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ddpm::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Runs one command. `args` excludes the program name, e.g.
/// {"train", "--synthetic", "16", "--out", "run1"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses "key = value" lines; '#' and ';' start comments, [section] lines
/// are ignored. Throws DataError on a malformed line.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

}  // namespace ddpm::cli
