#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "glean/example.hpp"
#include "glean/table.hpp"

namespace glean::io {

using nlohmann::json;

/// Calls `fn(object, line_number)` for every nonblank line. Parse failures
/// become SchemaError(file, line).
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn);

std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Writes one compact object per line; atomically replaces `path`.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Compact single-line dump; invalid UTF-8 is replaced, never dropped.
std::string dump(const json& j);
/// Pretty dump (2-space indent) with a trailing newline.
std::string dump_pretty(const json& j);

/// Replaces invalid UTF-8 sequences by U+FFFD.
std::string sanitize_utf8(std::string_view s);

json to_json(const Table& t);
Table table_from_json(const json& j);

json to_json(const Example& ex);
Example example_from_json(const json& j);

/// Required-field accessors that raise a descriptive std::invalid_argument;
/// callers rethrow as SchemaError with file and line.
const json& require(const json& j, const char* key);
std::string require_string(const json& j, const char* key);

/// Lower-case hex SHA-256 of a byte string / file.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

}  // namespace glean::io
