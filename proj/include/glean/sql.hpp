#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "glean/table.hpp"

struct sqlite3;

namespace glean {

// ---- AST ----

enum class Aggregate { kCount, kSum, kAvg, kMin, kMax };

/// A column reference or an aggregate call, as used in SELECT and ORDER BY.
struct SqlTerm {
  enum class Kind { kStar, kColumn, kAggregate };
  Kind kind = Kind::kColumn;
  std::string column;  // empty for COUNT(*)
  Aggregate aggregate = Aggregate::kCount;
  bool distinct = false;  // COUNT(DISTINCT c)

  bool operator==(const SqlTerm&) const = default;
};

struct SelectItem {
  SqlTerm term;
  std::optional<std::string> alias;
  bool operator==(const SelectItem&) const = default;
};

struct SqlLiteral {
  enum class Kind { kNull, kInteger, kReal, kText };
  Kind kind = Kind::kNull;
  std::string text;  // source spelling for numbers, decoded value for strings
  bool operator==(const SqlLiteral&) const = default;
};

struct SqlOperand {
  bool is_column = false;
  std::string column;
  SqlLiteral literal;
  bool operator==(const SqlOperand&) const = default;
};

enum class CompareOp { kEq, kNe, kLt, kLe, kGt, kGe };

struct SqlExpr;
using SqlExprPtr = std::shared_ptr<const SqlExpr>;

struct SqlExpr {
  enum class Kind { kAnd, kOr, kNot, kCompare, kLike, kIn, kBetween, kIsNull };
  Kind kind = Kind::kCompare;
  bool negated = false;  // NOT LIKE, NOT IN, NOT BETWEEN, IS NOT NULL
  CompareOp op = CompareOp::kEq;
  SqlOperand lhs;
  SqlOperand rhs;                 // compare, like; BETWEEN lower bound
  SqlOperand upper;               // BETWEEN upper bound
  std::vector<SqlLiteral> list;   // IN
  SqlExprPtr left;                // AND, OR, NOT
  SqlExprPtr right;               // AND, OR
};

bool operator==(const SqlExpr& a, const SqlExpr& b);

struct OrderItem {
  SqlTerm term;
  bool descending = false;
  bool operator==(const OrderItem&) const = default;
};

struct SqlQuery {
  std::string raw;
  /// Outside the modeled subset (joins, subqueries, CASE, arithmetic, other
  /// functions, set operations, HAVING). Only `raw` and `from_table` are set.
  bool complex_opaque = false;
  std::string opaque_reason;
  bool distinct = false;
  std::vector<SelectItem> items;
  std::string from_table;
  SqlExprPtr where;
  std::vector<std::string> group_by;
  std::vector<OrderItem> order_by;
  std::optional<std::int64_t> limit;
  std::optional<std::int64_t> offset;
};

/// Throws SqlSyntaxError(offset) for text that is neither in the subset nor
/// recognizably complex SQL.
SqlQuery parse_sql(std::string_view raw);

/// Canonical spelling: upper-case keywords, minimal parentheses. For opaque
/// queries returns `raw`.
std::string canonical_sql(const SqlQuery& q);
std::string canonical_expr(const SqlExpr& e);

/// Plain columns or star, no aggregate, no GROUP BY, not opaque. ORDER BY and
/// LIMIT are allowed.
bool classify_simple(const SqlQuery& q);

// ---- values with SQLite semantics ----

struct SqlValue {
  enum class Type { kNull, kInteger, kReal, kText };
  Type type = Type::kNull;
  std::int64_t i = 0;
  double r = 0.0;
  std::string s;

  bool is_numeric() const { return type == Type::kInteger || type == Type::kReal; }
  static SqlValue null() { return {}; }
  static SqlValue integer(std::int64_t v) { return {Type::kInteger, v, 0.0, {}}; }
  static SqlValue real(double v) { return {Type::kReal, 0, v, {}}; }
  static SqlValue text(std::string v) { return {Type::kText, 0, 0.0, std::move(v)}; }
};

/// Storage class a text value takes in a NUMERIC-affinity column.
SqlValue apply_numeric_affinity(std::string_view text);
SqlValue literal_value(const SqlLiteral& lit);
/// Text rendering of a value (REAL uses 15 significant digits).
std::string value_text(const SqlValue& v);
/// Cross-class ordering NULL < numeric < TEXT; BINARY text collation.
int compare_values(const SqlValue& a, const SqlValue& b);
/// ASCII case-insensitive LIKE with % and _ (one UTF-8 character).
bool like_match(std::string_view text, std::string_view pattern);

/// Resolves c1..cN (case-insensitive) to a 0-based column index.
std::optional<std::size_t> resolve_column(std::string_view name, std::size_t n_cols);

struct WhereEvaluation {
  std::vector<std::size_t> rows;
  /// Comparisons that paired a numeric with a text value.
  std::size_t type_mismatches = 0;
};

/// Row indices whose WHERE predicate is TRUE (all rows without WHERE).
/// Throws Error(kUnknownColumn).
WhereEvaluation evaluate_where(const Table& t, const SqlQuery& q);

// ---- engine bridge ----

enum class OracleStatus { kOk, kExecError };
std::string_view to_string(OracleStatus s);

struct OracleResult {
  OracleStatus status = OracleStatus::kOk;
  std::vector<std::string> denotation;
  std::string error_msg;
};

/// One embedded database handle. Not shareable across threads.
class Database {
 public:
  /// In-memory database with a single table `name` (c1..cN, NUMERIC affinity).
  static Database from_table(const Table& t, const std::string& name = "w");
  /// Opens an existing SQLite file read-only.
  static Database open_file(const std::filesystem::path& path);

  Database(Database&& other) noexcept;
  Database& operator=(Database&& other) noexcept;
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;
  ~Database();

  /// Runs one statement; NULL cells become "". Deterministic for a given db.
  OracleResult execute(const std::string& sql, std::uint64_t max_steps = 50'000'000) const;

 private:
  explicit Database(sqlite3* db) : db_(db) {}
  sqlite3* db_ = nullptr;
};

/// Executes the query's raw text.
OracleResult execute_gold(const Database& db, const SqlQuery& q);

/// Row ids the engine selects for the query's WHERE clause
/// ("SELECT rowid FROM ... WHERE ..."), 0-based, ascending.
std::vector<std::size_t> engine_where_rows(const Table& t, const SqlQuery& q);

/// FROM table of an opaque or parsed query, "w" when none is found.
std::string target_table_name(const SqlQuery& q);

// ---- denotation comparison ----

enum class MismatchCategory { kExact, kNormalizationFormat, kMultiValue, kEmptySql, kOther };
std::string_view to_string(MismatchCategory c);

struct MatchVerdict {
  bool exact = false;
  bool soft = false;
  MismatchCategory category = MismatchCategory::kOther;
};

/// Policy-aware soft match (any-element or bidirectional all-elements cover).
bool soft_match(const std::vector<std::string>& oracle, const std::vector<std::string>& gold,
                const GroundingConfig& cfg);

MatchVerdict compare_denotation(const std::vector<std::string>& oracle,
                                const std::vector<std::string>& gold, const GroundingConfig& cfg);

/// Answer-normalized multiset equality between denotation and gold.
bool denotation_em(const std::vector<std::string>& oracle, const std::vector<std::string>& gold);

struct DenotationPair {
  std::vector<std::string> oracle;
  std::vector<std::string> gold;
};

struct ToleranceSetting {
  std::string name;
  double abs_tol = 0.0;
  double rel_tol = 0.0;
};

/// strict 1e-6/0, default 1e-3/0.01, loose 1e-2/0.05.
std::vector<ToleranceSetting> default_tolerance_settings();

/// Soft-resolution rate per setting over exact-mismatch pairs; the other
/// fields of `base` are kept.
std::vector<std::pair<std::string, double>> tolerance_ablation(
    const std::vector<DenotationPair>& pairs, const std::vector<ToleranceSetting>& settings,
    const GroundingConfig& base = {});

struct SqlOutcome {
  std::string id;
  OracleStatus status = OracleStatus::kOk;
  MatchVerdict verdict;      // meaningful when status is ok
  bool target_em = false;    // denotation_em, meaningful when status is ok
};

struct AccountingReport {
  std::size_t total = 0;
  std::size_t executable = 0;
  std::size_t exact = 0;
  std::size_t soft = 0;
  std::size_t target_em = 0;
  std::size_t mismatches = 0;
  std::size_t soft_resolved = 0;
  std::map<MismatchCategory, std::size_t> categories;  // over mismatches

  double execution_rate() const;
  double exact_rate() const;          // of executable
  double soft_rate() const;           // of executable
  double sql_target_em() const;       // of executable
  std::optional<double> soft_resolved_rate() const;  // of mismatches
  std::optional<double> category_share(MismatchCategory c) const;
};

/// Throws Error(kInvalidArgument) on an empty list.
AccountingReport accounting(const std::vector<SqlOutcome>& results);

}  // namespace glean
