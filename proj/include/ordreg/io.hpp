#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ordreg {

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written file. Creates parent directories.
void write_file_atomic(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

/// Splits one CSV line on commas (no quoting support); strips a trailing CR.
std::vector<std::string> split_csv_line(std::string_view line);

std::string trim(std::string_view s);

}  // namespace ordreg
