#pragma once

// Minimal CSV helpers shared by every file format in the project: comma
// separated, no quoting, doubles written in shortest round-trip form.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hbd::csv {

std::vector<std::string_view> split(std::string_view line);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Strict parse: the whole field must be consumed. Returns nullopt otherwise.
std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_int(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Writes rows (already joined) after a header line; creates parent directories.
void write_file(const std::filesystem::path& path, const std::string& header, const std::vector<std::string>& rows);

/// Reads a whole file as lines, stripping a trailing '\r'.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace hbd::csv
