#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace crfrail {

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// Strict full-field parse; returns false on trailing junk or empty input.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, int& out);

std::string_view trim(std::string_view text);
// Splits one CSV line on commas, honouring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace crfrail
