#include "glean/serialization.hpp"

#include <cstdint>

#include "json.hpp"

#include "glean/error.hpp"

namespace glean {
namespace {

using nlohmann::json;

constexpr std::string_view kFormatNames[] = {"markdown", "csv", "tsv", "json", "html", "kv"};

std::string_view name_of(SerializationFormat f) { return kFormatNames[static_cast<int>(f)]; }

[[noreturn]] void malformed(SerializationFormat f, std::size_t line, const std::string& reason) {
  throw MalformedInput(std::string(name_of(f)), line, reason);
}

struct Line {
  std::string_view text;
  std::size_t number;
};

// Splits on '\n', dropping one trailing '\r' per line and blank lines.
std::vector<Line> nonblank_lines(std::string_view s) {
  std::vector<Line> out;
  std::size_t start = 0;
  std::size_t number = 1;
  while (start < s.size()) {
    std::size_t end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    std::string_view line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) out.push_back({line, number});
    start = end + 1;
    ++number;
  }
  return out;
}

// Splits on unescaped `sep`; backslash escapes are kept verbatim for the caller.
std::vector<std::string_view> split_unescaped(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\') {
      ++i;
    } else if (s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  out.push_back(s.substr(start));
  return out;
}

std::string backslash_escape(std::string_view s, std::string_view specials) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\r') {
      out += "\\r";
    } else if (c == '\t' && specials.find('\t') != std::string_view::npos) {
      out += "\\t";
    } else if (specials.find(c) != std::string_view::npos) {
      out.push_back('\\');
      out.push_back(c);
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string backslash_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    char n = s[++i];
    switch (n) {
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      case 't': out.push_back('\t'); break;
      default: out.push_back(n); break;
    }
  }
  return out;
}

// ---- csv / tsv ----

bool needs_quotes(std::string_view v, char delim, std::size_t n_cols) {
  if (v.empty()) return n_cols == 1;
  return v.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string_view::npos;
}

void emit_delimited_record(std::string& out, const std::vector<std::string>& fields, char delim) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.push_back(delim);
    std::string v = delim == '\t' ? backslash_escape(fields[i], "\t") : fields[i];
    if (needs_quotes(v, delim, fields.size())) {
      out.push_back('"');
      for (char c : v) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
      }
      out.push_back('"');
    } else {
      out += v;
    }
  }
  out.push_back('\n');
}

struct Record {
  std::vector<std::string> fields;
  std::size_t line;
};

std::vector<Record> parse_delimited(std::string_view s, char delim, SerializationFormat f) {
  std::vector<Record> records;
  std::size_t i = 0;
  std::size_t line = 1;
  auto at_eol = [&](std::size_t k) {
    return k < s.size() && (s[k] == '\n' || (s[k] == '\r' && k + 1 < s.size() && s[k + 1] == '\n'));
  };
  auto skip_eol = [&] {
    if (s[i] == '\r') ++i;
    ++i;
    ++line;
  };
  while (i < s.size()) {
    Record rec{{}, line};
    if (at_eol(i)) {
      skip_eol();
      records.push_back(std::move(rec));
      continue;
    }
    while (true) {
      std::string field;
      if (i < s.size() && s[i] == '"') {
        std::size_t open_line = line;
        ++i;
        while (true) {
          if (i >= s.size()) malformed(f, open_line, "unterminated quoted field");
          if (s[i] == '"') {
            if (i + 1 < s.size() && s[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (s[i] == '\n') ++line;
          field.push_back(s[i++]);
        }
        if (i < s.size() && s[i] != delim && !at_eol(i)) {
          malformed(f, line, "unexpected character after closing quote");
        }
      } else {
        while (i < s.size() && s[i] != delim && !at_eol(i)) field.push_back(s[i++]);
      }
      rec.fields.push_back(delim == '\t' ? backslash_unescape(field) : std::move(field));
      if (i < s.size() && s[i] == delim) {
        ++i;
        continue;
      }
      break;
    }
    if (i < s.size()) skip_eol();
    records.push_back(std::move(rec));
  }
  return records;
}

// ---- markdown ----

std::string md_escape(std::string_view s) { return backslash_escape(s, "|"); }

std::string strip_one_pad(std::string_view seg) {
  if (!seg.empty() && seg.front() == ' ') seg.remove_prefix(1);
  if (!seg.empty() && seg.back() == ' ') seg.remove_suffix(1);
  return std::string(seg);
}

std::vector<std::string_view> md_segments(const Line& line, SerializationFormat f) {
  std::string_view s = line.text;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty() || s.front() != '|') malformed(f, line.number, "row must start with '|'");
  s.remove_prefix(1);
  auto segs = split_unescaped(s, '|');
  if (segs.size() > 1 && segs.back().empty()) segs.pop_back();
  if (segs.size() == 1 && segs[0].empty()) segs.clear();
  return segs;
}

bool is_separator_cell(std::string_view seg) {
  std::string t = trim(seg);
  std::string_view v = t;
  if (!v.empty() && v.front() == ':') v.remove_prefix(1);
  if (!v.empty() && v.back() == ':') v.remove_suffix(1);
  return !v.empty() && v.find_first_not_of('-') == std::string_view::npos;
}

// ---- html ----

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string html_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    std::size_t semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    std::string_view ent = s.substr(i + 1, semi - i - 1);
    std::string decoded;
    if (ent == "amp") {
      decoded = "&";
    } else if (ent == "lt") {
      decoded = "<";
    } else if (ent == "gt") {
      decoded = ">";
    } else if (ent == "quot") {
      decoded = "\"";
    } else if (ent == "apos") {
      decoded = "'";
    } else if (ent == "nbsp") {
      decoded = "\xC2\xA0";
    } else if (ent.size() > 1 && ent[0] == '#') {
      bool hex = ent[1] == 'x' || ent[1] == 'X';
      std::string digits(ent.substr(hex ? 2 : 1));
      char* end = nullptr;
      unsigned long cp = digits.empty() ? 0 : std::strtoul(digits.c_str(), &end, hex ? 16 : 10);
      if (!digits.empty() && end && *end == '\0' && cp > 0 && cp <= 0x10FFFF) {
        append_utf8(decoded, static_cast<std::uint32_t>(cp));
      }
    }
    if (decoded.empty()) {
      out.push_back('&');
      continue;
    }
    out += decoded;
    i = semi;
  }
  return out;
}

std::vector<Record> parse_html_rows(std::string_view s, SerializationFormat f) {
  std::vector<Record> rows;
  bool in_row = false;
  bool in_cell = false;
  std::string cell;
  std::size_t line = 1;
  auto close_cell = [&] {
    if (in_cell) rows.back().fields.push_back(html_unescape(cell));
    in_cell = false;
    cell.clear();
  };
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '<') {
      if (s[i] == '\n') ++line;
      if (in_cell) cell.push_back(s[i]);
      ++i;
      continue;
    }
    if (s.compare(i, 4, "<!--") == 0) {
      std::size_t end = s.find("-->", i);
      if (end == std::string_view::npos) malformed(f, line, "unterminated comment");
      for (std::size_t k = i; k < end; ++k) line += s[k] == '\n';
      i = end + 3;
      continue;
    }
    std::size_t close = s.find('>', i);
    if (close == std::string_view::npos) malformed(f, line, "unterminated tag");
    std::string_view body = s.substr(i + 1, close - i - 1);
    for (char c : body) line += c == '\n';
    i = close + 1;
    bool end_tag = !body.empty() && body.front() == '/';
    if (end_tag) body.remove_prefix(1);
    std::size_t name_end = body.find_first_of(" \t\r\n/");
    std::string name = ascii_lower(body.substr(0, name_end));
    if (name == "tr") {
      close_cell();
      if (end_tag) {
        in_row = false;
      } else {
        rows.push_back(Record{{}, line});
        in_row = true;
      }
    } else if (name == "td" || name == "th") {
      close_cell();
      if (!end_tag) {
        if (!in_row) malformed(f, line, "cell outside <tr>");
        in_cell = true;
      }
    } else if (name == "table") {
      close_cell();
      in_row = false;
    } else if (in_cell) {
      // Unknown markup inside a cell (e.g. <b>) is dropped; text is kept.
    }
  }
  if (in_cell) malformed(f, line, "unterminated cell");
  return rows;
}

// ---- kv ----

std::string kv_escape(std::string_view s) { return backslash_escape(s, ";="); }

std::string_view strip_leading_space(std::string_view s) {
  if (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::string_view strip_trailing_space(std::string_view s) {
  if (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

ParsedTable build(std::vector<std::string> headers, std::vector<Record> rows,
                  SerializationFormat f, std::string table_id) {
  ParsedTable out;
  std::vector<std::vector<std::string>> grid;
  grid.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& fields = rows[r].fields;
    if (fields.size() > headers.size()) {
      malformed(f, rows[r].line,
                "row has " + std::to_string(fields.size()) + " cells but the header has " +
                    std::to_string(headers.size()));
    }
    if (fields.size() < headers.size()) {
      fields.resize(headers.size());
      out.padded_rows.push_back(r);
    }
    grid.push_back(std::move(fields));
  }
  out.table = Table(std::move(table_id), std::move(headers), grid);
  return out;
}

}  // namespace

std::string_view to_string(SerializationFormat f) { return name_of(f); }

SerializationFormat parse_format(std::string_view name) {
  for (std::size_t i = 0; i < kAllFormats.size(); ++i) {
    if (kFormatNames[i] == name) return kAllFormats[i];
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown serialization format '" + std::string(name) + "'");
}

std::string markdown_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) {
    out += ' ';
    out += md_escape(c);
    out += " |";
  }
  return out;
}

std::string emit(const Table& t, SerializationFormat f) {
  std::string out;
  switch (f) {
    case SerializationFormat::kMarkdown: {
      out += markdown_row(t.headers()) + "\n|";
      for (std::size_t c = 0; c < t.n_cols(); ++c) out += " --- |";
      out += '\n';
      for (std::size_t r = 0; r < t.n_rows(); ++r) out += markdown_row(t.raw_row(r)) + "\n";
      break;
    }
    case SerializationFormat::kCsv:
    case SerializationFormat::kTsv: {
      char delim = f == SerializationFormat::kCsv ? ',' : '\t';
      emit_delimited_record(out, t.headers(), delim);
      for (std::size_t r = 0; r < t.n_rows(); ++r) emit_delimited_record(out, t.raw_row(r), delim);
      break;
    }
    case SerializationFormat::kJson: {
      json j;
      j["headers"] = t.headers();
      j["rows"] = t.raw_rows();
      out = j.dump(-1, ' ', false, json::error_handler_t::replace);
      break;
    }
    case SerializationFormat::kHtml: {
      out += "<table>\n<tr>";
      for (const auto& h : t.headers()) out += "<th>" + html_escape(h) + "</th>";
      out += "</tr>\n";
      for (std::size_t r = 0; r < t.n_rows(); ++r) {
        out += "<tr>";
        for (std::size_t c = 0; c < t.n_cols(); ++c) out += "<td>" + html_escape(t.raw(r, c)) + "</td>";
        out += "</tr>\n";
      }
      out += "</table>\n";
      break;
    }
    case SerializationFormat::kKv: {
      if (t.n_rows() == 0) {
        out += "columns:";
        for (std::size_t c = 0; c < t.n_cols(); ++c) {
          out += c > 0 ? "; " : " ";
          out += kv_escape(t.headers()[c]);
        }
        out += '\n';
        break;
      }
      for (std::size_t r = 0; r < t.n_rows(); ++r) {
        out += "row " + std::to_string(r + 1) + ": ";
        for (std::size_t c = 0; c < t.n_cols(); ++c) {
          if (c > 0) out += "; ";
          out += kv_escape(t.headers()[c]) + " = " + kv_escape(t.raw(r, c));
        }
        out += '\n';
      }
      break;
    }
  }
  return out;
}

ParsedTable parse_table(std::string_view text, SerializationFormat f, std::string table_id) {
  switch (f) {
    case SerializationFormat::kCsv:
    case SerializationFormat::kTsv: {
      auto records = parse_delimited(text, f == SerializationFormat::kCsv ? ',' : '\t', f);
      if (records.empty()) malformed(f, 1, "missing header record");
      auto headers = std::move(records.front().fields);
      records.erase(records.begin());
      return build(std::move(headers), std::move(records), f, std::move(table_id));
    }
    case SerializationFormat::kMarkdown: {
      auto lines = nonblank_lines(text);
      if (lines.empty()) malformed(f, 1, "missing header row");
      std::vector<std::string> headers;
      for (auto seg : md_segments(lines[0], f)) headers.push_back(backslash_unescape(strip_one_pad(seg)));
      if (lines.size() < 2) malformed(f, lines[0].number + 1, "missing separator row");
      auto sep = md_segments(lines[1], f);
      bool is_sep = sep.size() == headers.size();
      for (auto seg : sep) is_sep = is_sep && is_separator_cell(seg);
      if (!is_sep) malformed(f, lines[1].number, "missing separator row");
      std::vector<Record> rows;
      for (std::size_t i = 2; i < lines.size(); ++i) {
        Record rec{{}, lines[i].number};
        for (auto seg : md_segments(lines[i], f)) rec.fields.push_back(backslash_unescape(strip_one_pad(seg)));
        rows.push_back(std::move(rec));
      }
      return build(std::move(headers), std::move(rows), f, std::move(table_id));
    }
    case SerializationFormat::kJson: {
      json j;
      try {
        j = json::parse(text);
      } catch (const json::parse_error& e) {
        malformed(f, 1, e.what());
      }
      if (!j.is_object() || !j.contains("headers") || !j.contains("rows") ||
          !j["headers"].is_array() || !j["rows"].is_array()) {
        malformed(f, 1, "expected {\"headers\": [...], \"rows\": [[...]]}");
      }
      std::vector<std::string> headers;
      for (const auto& h : j["headers"]) {
        if (!h.is_string()) malformed(f, 1, "headers must be strings");
        headers.push_back(h.get<std::string>());
      }
      std::vector<Record> rows;
      for (const auto& row : j["rows"]) {
        if (!row.is_array()) malformed(f, 1, "rows must be arrays");
        Record rec{{}, 1};
        for (const auto& c : row) {
          if (!c.is_string()) malformed(f, 1, "cells must be strings");
          rec.fields.push_back(c.get<std::string>());
        }
        rows.push_back(std::move(rec));
      }
      return build(std::move(headers), std::move(rows), f, std::move(table_id));
    }
    case SerializationFormat::kHtml: {
      auto rows = parse_html_rows(text, f);
      if (rows.empty()) malformed(f, 1, "no <tr> rows");
      auto headers = std::move(rows.front().fields);
      rows.erase(rows.begin());
      return build(std::move(headers), std::move(rows), f, std::move(table_id));
    }
    case SerializationFormat::kKv: {
      auto lines = nonblank_lines(text);
      if (lines.empty()) malformed(f, 1, "empty input");
      std::vector<std::string> headers;
      if (lines[0].text.substr(0, 8) == "columns:") {
        if (lines.size() > 1) malformed(f, lines[1].number, "rows after a columns line");
        // "columns:" alone is a table without columns; one empty header is "columns: ".
        std::string_view rest = lines[0].text.substr(8);
        if (!rest.empty()) {
          for (auto seg : split_unescaped(strip_leading_space(rest), ';')) {
            headers.push_back(backslash_unescape(headers.empty() ? seg : strip_leading_space(seg)));
          }
        }
        return build(std::move(headers), {}, f, std::move(table_id));
      }
      std::vector<Record> rows;
      for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        std::string prefix = "row " + std::to_string(i + 1) + ":";
        if (line.text.substr(0, prefix.size()) != prefix) {
          malformed(f, line.number, "expected '" + prefix + "'");
        }
        std::string_view rest = strip_leading_space(line.text.substr(prefix.size()));
        Record rec{{}, line.number};
        std::vector<std::string> keys;
        if (!rest.empty()) {
          auto pairs = split_unescaped(rest, ';');
          for (std::size_t p = 0; p < pairs.size(); ++p) {
            std::string_view pair = p == 0 ? pairs[p] : strip_leading_space(pairs[p]);
            auto kv = split_unescaped(pair, '=');
            if (kv.size() < 2) malformed(f, line.number, "pair without '='");
            std::string_view value = pair.substr(kv[0].size() + 1);
            keys.push_back(backslash_unescape(strip_trailing_space(kv[0])));
            rec.fields.push_back(backslash_unescape(strip_leading_space(value)));
          }
        }
        if (i == 0) {
          headers = keys;
        } else {
          for (std::size_t k = 0; k < keys.size(); ++k) {
            if (k >= headers.size() || keys[k] != headers[k]) {
              malformed(f, line.number, "key '" + keys[k] + "' does not match the header order");
            }
          }
        }
        rows.push_back(std::move(rec));
      }
      return build(std::move(headers), std::move(rows), f, std::move(table_id));
    }
  }
  malformed(f, 1, "unknown format");
}

}  // namespace glean
