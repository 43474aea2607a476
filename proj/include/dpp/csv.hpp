#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dpp {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws InvalidInput when absent.
  std::size_t column(std::string_view name) const;
};

/// Writes header + rows with '\n' line endings.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Reads a file written by write_csv (quoted fields supported, no embedded newlines).
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace dpp
