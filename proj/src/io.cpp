#include "glean/io.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

#include "glean/error.hpp"

namespace glean::io {

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(path.string(), lineno, e.what());
    }
    if (!j.is_object()) throw SchemaError(path.string(), lineno, "expected a JSON object");
    try {
      fn(j, lineno);
    } catch (const std::invalid_argument& e) {
      throw SchemaError(path.string(), lineno, e.what());
    } catch (const json::exception& e) {
      throw SchemaError(path.string(), lineno, e.what());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInvalidArgument) throw;
      throw SchemaError(path.string(), lineno, e.what());
    }
  }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(j); });
  return out;
}

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

std::string dump_pretty(const json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::string text;
  for (const auto& r : rows) {
    text += dump(r);
    text += '\n';
  }
  write_text(path, text);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sanitize_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (c < 0x80) {
      len = 1;
    } else if (c >= 0xC2 && c <= 0xDF) {
      len = 2;
    } else if (c >= 0xE0 && c <= 0xEF) {
      len = 3;
    } else if (c >= 0xF0 && c <= 0xF4) {
      len = 4;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      ok = (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    }
    if (ok && len == 3) {
      auto c1 = static_cast<unsigned char>(s[i + 1]);
      if ((c == 0xE0 && c1 < 0xA0) || (c == 0xED && c1 >= 0xA0)) ok = false;
    }
    if (ok && len == 4) {
      auto c1 = static_cast<unsigned char>(s[i + 1]);
      if ((c == 0xF0 && c1 < 0x90) || (c == 0xF4 && c1 >= 0x90)) ok = false;
    }
    if (ok) {
      out.append(s.substr(i, len));
      i += len;
    } else {
      out.append("\xEF\xBF\xBD");
      ++i;
    }
  }
  return out;
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw std::invalid_argument(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

json to_json(const Table& t) {
  return json{{"table_id", t.table_id()}, {"headers", t.headers()}, {"rows", t.raw_rows()}};
}

Table table_from_json(const json& j) {
  auto id = require_string(j, "table_id");
  const auto& headers = require(j, "headers");
  const auto& rows = require(j, "rows");
  if (!headers.is_array()) throw std::invalid_argument("'headers' must be an array of strings");
  if (!rows.is_array()) throw std::invalid_argument("'rows' must be an array of arrays");
  std::vector<std::string> hs;
  for (const auto& h : headers) {
    if (!h.is_string()) throw std::invalid_argument("'headers' must be an array of strings");
    hs.push_back(h.get<std::string>());
  }
  std::vector<std::vector<std::string>> grid;
  for (const auto& row : rows) {
    if (!row.is_array()) throw std::invalid_argument("'rows' must be an array of arrays");
    std::vector<std::string> cells;
    for (const auto& c : row) {
      if (c.is_string()) {
        cells.push_back(c.get<std::string>());
      } else if (c.is_null()) {
        cells.emplace_back();
      } else if (c.is_number() || c.is_boolean()) {
        cells.push_back(c.dump());
      } else {
        throw std::invalid_argument("cells must be scalars");
      }
    }
    if (cells.size() != hs.size()) {
      throw std::invalid_argument("ragged row in table '" + id + "'");
    }
    grid.push_back(std::move(cells));
  }
  if (id.empty()) throw std::invalid_argument("table_id must be nonempty");
  return Table(std::move(id), std::move(hs), grid);
}

json to_json(const Example& ex) {
  json j{{"id", ex.id}, {"task", std::string(to_string(ex.task))}, {"question", ex.question},
         {"table_id", ex.table_id}};
  if (ex.task == Task::kQa) {
    j["gold_answers"] = ex.gold_answers;
  } else {
    j["label"] = ex.label;
  }
  if (ex.gold_sql) j["gold_sql"] = *ex.gold_sql;
  return j;
}

Example example_from_json(const json& j) {
  Example ex;
  ex.id = require_string(j, "id");
  if (auto it = j.find("task"); it != j.end()) {
    if (!it->is_string()) throw std::invalid_argument("'task' must be a string");
    auto task = it->get<std::string>();
    if (task != "qa" && task != "verdict") throw std::invalid_argument("'task' must be qa|verdict");
    ex.task = task == "qa" ? Task::kQa : Task::kVerdict;
  } else {
    ex.task = j.contains("label") ? Task::kVerdict : Task::kQa;
  }
  ex.question = require_string(j, "question");
  ex.table_id = require_string(j, "table_id");
  if (ex.task == Task::kQa) {
    const auto& answers = require(j, "gold_answers");
    if (answers.is_string()) {
      ex.gold_answers.push_back(answers.get<std::string>());
    } else if (answers.is_array()) {
      for (const auto& a : answers) {
        if (a.is_string()) {
          ex.gold_answers.push_back(a.get<std::string>());
        } else if (a.is_number()) {
          ex.gold_answers.push_back(a.dump());
        } else {
          throw std::invalid_argument("gold_answers must hold strings");
        }
      }
    } else {
      throw std::invalid_argument("'gold_answers' must be a list of strings");
    }
    if (ex.gold_answers.empty()) throw std::invalid_argument("qa example needs gold_answers");
  } else {
    ex.label = require_string(j, "label");
    if (ex.label != "entailed" && ex.label != "refuted" && ex.label != "nei") {
      throw std::invalid_argument("'label' must be entailed|refuted|nei");
    }
  }
  if (auto it = j.find("gold_sql"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw std::invalid_argument("'gold_sql' must be a string");
    ex.gold_sql = it->get<std::string>();
  }
  if (ex.id.empty()) throw std::invalid_argument("'id' must be nonempty");
  return ex;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

}  // namespace glean::io
