#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace glean {

enum class MultiValuePolicy { kAnyElement, kAllElements };

std::string_view to_string(MultiValuePolicy policy);
MultiValuePolicy parse_multivalue_policy(std::string_view name);

/// Knobs controlling how raw strings are normalized and compared. The same
/// config drives evidence detection, soft matching and attribution grounding.
struct GroundingConfig {
  bool casefold = true;
  bool strip_punct = true;
  /// Drop the English articles a/an/the. Off for grounding; on for EM/F1.
  bool strip_articles = false;
  bool substring_text_match = true;
  double numeric_abs_tol = 1e-3;
  double numeric_rel_tol = 0.01;
  MultiValuePolicy multivalue_policy = MultiValuePolicy::kAnyElement;

  /// Exact-mode config: the normalization used by EM, zero tolerance, no
  /// substring containment.
  static GroundingConfig exact();

  /// Throws Error(kInvalidArgument) when a tolerance is out of range.
  void validate() const;

  /// True when both configs produce identical NormalizedValues for every input.
  bool same_normalization(const GroundingConfig& other) const;

  bool operator==(const GroundingConfig&) const = default;
};

enum class ValueKind { kNumeric, kText };

/// Result of normalizing a raw cell or answer string. `text` is the canonical
/// form: the shortest round-trip decimal for numerics, the casefolded,
/// punctuation-stripped, whitespace-collapsed string otherwise.
struct NormalizedValue {
  ValueKind kind = ValueKind::kText;
  double num = 0.0;
  std::string text;

  bool is_numeric() const { return kind == ValueKind::kNumeric; }
  bool operator==(const NormalizedValue& other) const;
};

/// Locale-independent numeric parse: surrounding whitespace, thousands
/// separators (',' and '_') and currency symbols ($, €, £, %) are stripped;
/// a leading sign and one decimal point are accepted. '%' does not rescale.
std::optional<double> parse_number(std::string_view raw);

/// Shortest decimal string that round-trips to `value` ("-0" folds to "0").
std::string canonical_number(double value);

/// Text path of normalization only (no numeric detection).
std::string normalize_text(std::string_view raw, const GroundingConfig& cfg);

NormalizedValue normalize(std::string_view raw, const GroundingConfig& cfg = {});

bool values_match(const NormalizedValue& a, const NormalizedValue& b, const GroundingConfig& cfg);

struct Cell {
  std::string raw;
  NormalizedValue normalized;  // under a default GroundingConfig
};

/// Rectangular table of cells. Immutable once built.
class Table {
 public:
  Table() = default;
  /// Throws Error(kInvalidArgument) on an empty id or a ragged grid.
  Table(std::string table_id, std::vector<std::string> headers,
        const std::vector<std::vector<std::string>>& rows);

  const std::string& table_id() const { return table_id_; }
  const std::vector<std::string>& headers() const { return headers_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }
  std::size_t n_rows() const { return rows_.size(); }
  std::size_t n_cols() const { return headers_.size(); }

  const Cell& cell(std::size_t row, std::size_t col) const { return rows_.at(row).at(col); }
  const std::string& raw(std::size_t row, std::size_t col) const { return cell(row, col).raw; }
  std::vector<std::string> raw_row(std::size_t row) const;
  std::vector<std::vector<std::string>> raw_rows() const;

  /// Same grid under a different id.
  Table with_id(std::string table_id) const;

  bool operator==(const Table& other) const;

 private:
  std::string table_id_;
  std::vector<std::string> headers_;
  std::vector<std::vector<Cell>> rows_;
};

/// Cell normalized under `cfg`, reusing the cached value when possible.
NormalizedValue normalized_cell(const Table& t, std::size_t row, std::size_t col,
                                const GroundingConfig& cfg);

bool table_contains(const Table& t, const NormalizedValue& v, const GroundingConfig& cfg);

using TokenSet = std::set<std::string>;

/// |a ∩ b| / |a ∪ b|; 0 when both are empty.
double jaccard(const TokenSet& a, const TokenSet& b);

/// Budget tokenizer: whitespace-separated runs, with every ASCII punctuation
/// character split out as its own token.
std::vector<std::string> split_tokens(std::string_view s);
std::size_t count_tokens(std::string_view s);

/// Casefolded word tokens used for retrieval and overlap features.
/// Punctuation separates tokens and is dropped, except '.' and ',' between two
/// digits, which stay inside the token ("2,000", "3.5").
std::vector<std::string> content_tokens(std::string_view s);
TokenSet content_token_set(std::string_view s);

struct TokenBudget {
  std::size_t max_table_tokens = 1024;
  std::size_t max_cols = 16;

  void validate() const;
};

/// ASCII-only casefold; non-ASCII bytes pass through unchanged.
std::string ascii_lower(std::string_view s);
std::string trim(std::string_view s);

}  // namespace glean
