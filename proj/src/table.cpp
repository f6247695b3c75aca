#include "glean/table.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>

#include "glean/error.hpp"

namespace glean {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
         (c >= 0x7b && c <= 0x7e);
}

// Multi-byte UTF-8 punctuation treated like ASCII punctuation.
constexpr std::array<std::string_view, 13> kUnicodePunct = {
    "\xE2\x80\x93", "\xE2\x80\x94", "\xE2\x80\x98", "\xE2\x80\x99", "\xE2\x80\x9C",
    "\xE2\x80\x9D", "\xE2\x80\xA6", "\xE2\x80\xA2", "\xE2\x88\x92", "\xC2\xA3",
    "\xE2\x82\xAC", "\xC2\xB7",     "\xC2\xAB"};
constexpr std::string_view kNbsp = "\xC2\xA0";

// Length of the unicode punctuation sequence starting at s[i], or 0.
std::size_t unicode_punct_at(std::string_view s, std::size_t i) {
  if (static_cast<unsigned char>(s[i]) < 0x80) return 0;
  for (auto p : kUnicodePunct) {
    if (s.compare(i, p.size(), p) == 0) return p.size();
  }
  if (s.compare(i, 2, "\xC2\xBB") == 0) return 2;
  return 0;
}

bool is_article(std::string_view w) {
  return w == "a" || w == "an" || w == "the" || w == "A" || w == "An" || w == "AN" ||
         w == "The" || w == "THE";
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    unsigned char c = s[i];
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (s.compare(i, kNbsp.size(), kNbsp) == 0) {
      pending = !out.empty();
      ++i;
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

}  // namespace

std::string_view to_string(MultiValuePolicy policy) {
  return policy == MultiValuePolicy::kAnyElement ? "any-element" : "all-elements";
}

MultiValuePolicy parse_multivalue_policy(std::string_view name) {
  if (name == "any-element" || name == "any") return MultiValuePolicy::kAnyElement;
  if (name == "all-elements" || name == "all") return MultiValuePolicy::kAllElements;
  throw Error(ErrorCode::kInvalidArgument, "unknown multivalue policy '" + std::string(name) + "'");
}

GroundingConfig GroundingConfig::exact() {
  GroundingConfig cfg;
  cfg.strip_articles = true;
  cfg.substring_text_match = false;
  cfg.numeric_abs_tol = 0.0;
  cfg.numeric_rel_tol = 0.0;
  return cfg;
}

void GroundingConfig::validate() const {
  if (!(numeric_abs_tol >= 0.0) || !std::isfinite(numeric_abs_tol)) {
    throw Error(ErrorCode::kInvalidArgument, "numeric_abs_tol must be >= 0");
  }
  if (!(numeric_rel_tol >= 0.0 && numeric_rel_tol <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "numeric_rel_tol must lie in [0, 1]");
  }
}

bool GroundingConfig::same_normalization(const GroundingConfig& other) const {
  return casefold == other.casefold && strip_punct == other.strip_punct &&
         strip_articles == other.strip_articles;
}

bool NormalizedValue::operator==(const NormalizedValue& other) const {
  if (kind != other.kind) return false;
  if (kind == ValueKind::kNumeric) return num == other.num;
  return text == other.text;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::optional<double> parse_number(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c == ',' || c == '_' || c == '$' || c == '%') continue;
    if (raw.compare(i, 3, "\xE2\x82\xAC") == 0) {  // €
      i += 2;
      continue;
    }
    if (raw.compare(i, 2, "\xC2\xA3") == 0) {  // £
      i += 1;
      continue;
    }
    if (raw.compare(i, 3, "\xE2\x88\x92") == 0) {  // unicode minus
      s.push_back('-');
      i += 2;
      continue;
    }
    s.push_back(c);
  }
  s = trim(s);
  if (s.empty()) return std::nullopt;

  std::size_t i = 0;
  bool negative = false;
  if (s[i] == '+' || s[i] == '-') {
    negative = s[i] == '-';
    ++i;
  }
  std::size_t digits = 0;
  bool seen_point = false;
  for (std::size_t j = i; j < s.size(); ++j) {
    if (is_digit(s[j])) {
      ++digits;
    } else if (s[j] == '.' && !seen_point) {
      seen_point = true;
    } else {
      return std::nullopt;
    }
  }
  if (digits == 0) return std::nullopt;

  double value = 0.0;
  auto first = s.data() + i;
  auto last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::fixed);
  if (ec == std::errc::result_out_of_range) {
    value = std::strtod(std::string(first, last).c_str(), nullptr);
  } else if (ec != std::errc() || ptr != last) {
    return std::nullopt;
  }
  if (!std::isfinite(value)) return std::nullopt;
  if (negative) value = -value;
  if (value == 0.0) value = 0.0;  // fold -0
  return value;
}

std::string canonical_number(double value) {
  if (value == 0.0) return "0";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  (void)ec;
  return std::string(buf.data(), ptr);
}

std::string normalize_text(std::string_view raw, const GroundingConfig& cfg) {
  std::string s;
  s.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    unsigned char c = raw[i];
    if (cfg.strip_punct) {
      if (is_ascii_punct(c)) continue;
      if (std::size_t n = unicode_punct_at(raw, i); n > 0) {
        i += n - 1;
        continue;
      }
    }
    if (cfg.casefold && c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    s.push_back(static_cast<char>(c));
  }
  s = collapse_whitespace(s);
  if (!cfg.strip_articles) return s;

  std::string out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(' ', start);
    if (end == std::string::npos) end = s.size();
    std::string_view word(s.data() + start, end - start);
    if (!word.empty() && !is_article(word)) {
      if (!out.empty()) out.push_back(' ');
      out.append(word);
    }
    start = end + 1;
  }
  return out;
}

NormalizedValue normalize(std::string_view raw, const GroundingConfig& cfg) {
  NormalizedValue v;
  if (auto num = parse_number(raw)) {
    v.kind = ValueKind::kNumeric;
    v.num = *num;
    v.text = canonical_number(*num);
    return v;
  }
  v.text = normalize_text(raw, cfg);
  // A text form that is itself a bare number ("(7)" -> "7") is numeric, so
  // normalization stays idempotent.
  if (auto num = parse_number(v.text)) {
    v.kind = ValueKind::kNumeric;
    v.num = *num;
    v.text = canonical_number(*num);
  }
  return v;
}

namespace {

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < s.size()) {
    std::size_t end = s.find(' ', start);
    if (end == std::string_view::npos) end = s.size();
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

// Whole-word containment of `needle` inside `hay` (both whitespace-collapsed).
bool contains_words(std::string_view hay, std::string_view needle) {
  auto h = words(hay);
  auto n = words(needle);
  if (n.empty() || n.size() > h.size()) return false;
  for (std::size_t i = 0; i + n.size() <= h.size(); ++i) {
    if (std::equal(n.begin(), n.end(), h.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  }
  return false;
}

}  // namespace

bool values_match(const NormalizedValue& a, const NormalizedValue& b, const GroundingConfig& cfg) {
  if (a.is_numeric() && b.is_numeric()) {
    double diff = std::fabs(a.num - b.num);
    if (diff <= cfg.numeric_abs_tol) return true;
    double scale = std::max({std::fabs(a.num), std::fabs(b.num), 1e-12});
    return diff / scale <= cfg.numeric_rel_tol;
  }
  if (a.text == b.text) return true;
  if (!cfg.substring_text_match || a.text.empty() || b.text.empty()) return false;
  if (a.kind == b.kind) {
    return a.text.find(b.text) != std::string::npos || b.text.find(a.text) != std::string::npos;
  }
  // A number only matches inside text as a whole word ("7" in "7 wins", not in "17").
  return contains_words(a.text, b.text) || contains_words(b.text, a.text);
}

Table::Table(std::string table_id, std::vector<std::string> headers,
             const std::vector<std::vector<std::string>>& rows)
    : table_id_(std::move(table_id)), headers_(std::move(headers)) {
  if (table_id_.empty()) throw Error(ErrorCode::kInvalidArgument, "table_id must be nonempty");
  rows_.reserve(rows.size());
  const GroundingConfig defaults;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != headers_.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "table '" + table_id_ + "' row " + std::to_string(r) + " has " +
                      std::to_string(rows[r].size()) + " cells, expected " +
                      std::to_string(headers_.size()));
    }
    std::vector<Cell> cells;
    cells.reserve(rows[r].size());
    for (const auto& raw : rows[r]) cells.push_back(Cell{raw, normalize(raw, defaults)});
    rows_.push_back(std::move(cells));
  }
}

std::vector<std::string> Table::raw_row(std::size_t row) const {
  std::vector<std::string> out;
  out.reserve(n_cols());
  for (const auto& c : rows_.at(row)) out.push_back(c.raw);
  return out;
}

std::vector<std::vector<std::string>> Table::raw_rows() const {
  std::vector<std::vector<std::string>> out;
  out.reserve(n_rows());
  for (std::size_t r = 0; r < n_rows(); ++r) out.push_back(raw_row(r));
  return out;
}

Table Table::with_id(std::string table_id) const {
  Table t = *this;
  if (table_id.empty()) throw Error(ErrorCode::kInvalidArgument, "table_id must be nonempty");
  t.table_id_ = std::move(table_id);
  return t;
}

bool Table::operator==(const Table& other) const {
  if (table_id_ != other.table_id_ || headers_ != other.headers_ || n_rows() != other.n_rows()) {
    return false;
  }
  for (std::size_t r = 0; r < n_rows(); ++r) {
    for (std::size_t c = 0; c < n_cols(); ++c) {
      if (rows_[r][c].raw != other.rows_[r][c].raw) return false;
    }
  }
  return true;
}

NormalizedValue normalized_cell(const Table& t, std::size_t row, std::size_t col,
                                const GroundingConfig& cfg) {
  const Cell& cell = t.cell(row, col);
  if (cfg.same_normalization(GroundingConfig{})) return cell.normalized;
  return normalize(cell.raw, cfg);
}

bool table_contains(const Table& t, const NormalizedValue& v, const GroundingConfig& cfg) {
  const bool cached = cfg.same_normalization(GroundingConfig{});
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      const Cell& cell = t.cell(r, c);
      if (cached ? values_match(cell.normalized, v, cfg)
                 : values_match(normalize(cell.raw, cfg), v, cfg)) {
        return true;
      }
    }
  }
  return false;
}

double jaccard(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::string> split_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : s) {
    if (is_space(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  flush();
  return out;
}

std::size_t count_tokens(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (is_ascii_punct(c)) {
      in_word = false;
      ++n;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::vector<std::string> content_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    unsigned char c = s[i];
    if (is_space(c)) {
      flush();
      continue;
    }
    if (is_ascii_punct(c)) {
      bool numeric_sep = (c == '.' || c == ',') && !cur.empty() && is_digit(cur.back()) &&
                         i + 1 < s.size() && is_digit(s[i + 1]);
      if (numeric_sep) {
        cur.push_back(static_cast<char>(c));
      } else {
        flush();
      }
      continue;
    }
    if (std::size_t n = unicode_punct_at(s, i); n > 0) {
      flush();
      i += n - 1;
      continue;
    }
    if (s.compare(i, kNbsp.size(), kNbsp) == 0) {
      flush();
      ++i;
      continue;
    }
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    cur.push_back(static_cast<char>(c));
  }
  flush();
  return out;
}

TokenSet content_token_set(std::string_view s) {
  auto toks = content_tokens(s);
  return TokenSet(toks.begin(), toks.end());
}

void TokenBudget::validate() const {
  if (max_table_tokens == 0) throw Error(ErrorCode::kInvalidArgument, "max_table_tokens must be > 0");
  if (max_cols == 0) throw Error(ErrorCode::kInvalidArgument, "max_cols must be > 0");
}

}  // namespace glean
