#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace crfrail::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kOther = 1;
inline constexpr int kUsage = 2;
inline constexpr int kIo = 3;
inline constexpr int kInvalidInput = 4;  // schema or validation
inline constexpr int kNumerical = 5;     // numerical, convergence or domain

// Runs one subcommand. `args` excludes the program name. Errors are written to
// `err` as a single JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace crfrail::cli
