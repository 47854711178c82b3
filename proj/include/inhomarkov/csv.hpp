#pragma once

// Minimal comma-separated I/O: no quoting, header row required.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace inhomarkov::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based file line of each row

  /// Column position by name, or throws InputError.
  std::size_t column(std::string_view name) const;
};

std::vector<std::string> split_line(std::string_view line);

/// Reads a whole file. Every data row must have as many fields as the header.
Table read(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Parses a full-field double; throws InputError naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);

void write_text(const std::filesystem::path& path, std::string_view contents);
std::string read_text(const std::filesystem::path& path);

}  // namespace inhomarkov::csv
