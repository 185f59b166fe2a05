#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace radsim::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;
  // 1-based line on which each data row starts, for error messages.
  std::vector<std::size_t> lines;

  std::optional<std::size_t> column(std::string_view name) const;
};

// RFC-4180 reader. Line breaks inside quoted fields come back as "\n"
// whatever the file used; a leading UTF-8 BOM is skipped.
Table parse(std::string_view content);
Table read_file(const std::filesystem::path& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace radsim::csv
