#pragma once

#include "distclass/core.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace distclass::csv {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double x);

/// A numeric CSV table. Rows may have differing lengths; callers check.
struct Table {
  std::vector<std::vector<double>> rows;
  /// Byte offset of the first character of each row, for diagnostics.
  std::vector<std::size_t> row_offsets;
};

/// Parses comma-separated numbers. Blank lines are skipped; a first line
/// that fails to parse as numbers is treated as a header when
/// `allow_header` is set. Throws ParseError with the byte offset of the
/// offending field.
Table parse_numeric(std::string_view text, const std::string& source, bool allow_header = false);

Table read_numeric_file(const std::filesystem::path& path, bool allow_header = false);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Writes a matrix, one row per line, optionally preceded by `header`.
std::string format_matrix(const Matrix& m, const std::vector<std::string>& header = {});

}  // namespace distclass::csv
