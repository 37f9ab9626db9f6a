#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hsagnn::cli {

inline constexpr char kVersion[] = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kDivergence = 3 };

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace hsagnn::cli
