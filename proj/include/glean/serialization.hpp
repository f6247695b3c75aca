#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "glean/table.hpp"

namespace glean {

enum class SerializationFormat { kMarkdown, kCsv, kTsv, kJson, kHtml, kKv };

inline constexpr std::array<SerializationFormat, 6> kAllFormats = {
    SerializationFormat::kMarkdown, SerializationFormat::kCsv,  SerializationFormat::kTsv,
    SerializationFormat::kJson,     SerializationFormat::kHtml, SerializationFormat::kKv};

std::string_view to_string(SerializationFormat f);
SerializationFormat parse_format(std::string_view name);

/// Byte-stable rendering. Dialects:
///   markdown  "| h |" lines, "| --- |" separator; \| \\ \n \r escapes
///   csv       RFC 4180 quoting, '\n' record separator
///   tsv       as csv with TAB delimiter; tab, newline and backslash escaped
///   json      {"headers":[...],"rows":[[...]]} on one line
///   html      <table>/<tr>/<th>/<td>, first <tr> holds the headers
///   kv        "row i: h = v; h2 = v2" (1-indexed); \; \= \\ \n \r escapes;
///             a table without rows is written as "columns: h; h2"
std::string emit(const Table& t, SerializationFormat f);

/// Markdown text of a single data row ("| a | b |"), also the budget unit.
std::string markdown_row(const std::vector<std::string>& cells);

struct ParsedTable {
  Table table;
  /// Rows that were shorter than the header and padded with empty cells.
  std::vector<std::size_t> padded_rows;
};

/// Throws MalformedInput(format, line, reason). Rows longer than the header
/// are an error; shorter rows are padded and reported.
ParsedTable parse_table(std::string_view text, SerializationFormat f,
                        std::string table_id = "parsed");

inline Table parse(std::string_view text, SerializationFormat f, std::string table_id = "parsed") {
  return parse_table(text, f, std::move(table_id)).table;
}

}  // namespace glean
