#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ame {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC-4180 style parsing: comma separated, optional double-quoted fields
/// with "" escapes, LF or CRLF line endings. The first record is the header
/// and every following record must have the same number of fields.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);

}  // namespace ame
