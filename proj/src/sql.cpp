#include "glean/sql.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "glean/error.hpp"
#include "glean/metrics.hpp"

namespace glean {
namespace {

// ---- lexer ----

struct Token {
  enum class Kind { kIdent, kQuotedIdent, kNumber, kString, kSymbol, kEnd };
  Kind kind = Kind::kEnd;
  std::string text;   // identifier/number spelling, decoded string, symbol
  std::string upper;  // upper-cased text for bare identifiers
  std::size_t offset = 0;
};

struct ParseFailure {
  std::size_t offset;
  std::string reason;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (true) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    if (s.compare(i, 2, "--") == 0) {
      while (i < s.size() && s[i] != '\n') ++i;
      continue;
    }
    Token tok;
    tok.offset = i;
    char c = s[i];
    if (ident_start(c) || static_cast<unsigned char>(c) >= 0x80) {
      std::size_t b = i;
      while (i < s.size() && (ident_char(s[i]) || static_cast<unsigned char>(s[i]) >= 0x80)) ++i;
      tok.kind = Token::Kind::kIdent;
      tok.text = std::string(s.substr(b, i - b));
      tok.upper = upper(tok.text);
    } else if (is_digit(c) || (c == '.' && i + 1 < s.size() && is_digit(s[i + 1]))) {
      std::size_t b = i;
      while (i < s.size() && is_digit(s[i])) ++i;
      if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && is_digit(s[i])) ++i;
      }
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t e = i + 1;
        if (e < s.size() && (s[e] == '+' || s[e] == '-')) ++e;
        if (e < s.size() && is_digit(s[e])) {
          i = e;
          while (i < s.size() && is_digit(s[i])) ++i;
        }
      }
      if (i < s.size() && ident_char(s[i])) throw ParseFailure{b, "malformed number"};
      tok.kind = Token::Kind::kNumber;
      tok.text = std::string(s.substr(b, i - b));
    } else if (c == '\'' || c == '"' || c == '`' || c == '[') {
      char close = c == '[' ? ']' : c;
      std::size_t b = i++;
      std::string text;
      while (true) {
        if (i >= s.size()) throw ParseFailure{b, "unterminated quoted token"};
        if (s[i] == close) {
          if (close != ']' && i + 1 < s.size() && s[i + 1] == close) {
            text.push_back(close);
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        text.push_back(s[i++]);
      }
      tok.kind = c == '\'' ? Token::Kind::kString : Token::Kind::kQuotedIdent;
      tok.text = std::move(text);
    } else {
      static constexpr std::array<std::string_view, 8> kTwo = {"<=", ">=", "<>", "!=", "==", "||", "<<", ">>"};
      tok.kind = Token::Kind::kSymbol;
      for (auto two : kTwo) {
        if (s.compare(i, 2, two) == 0) tok.text = std::string(two);
      }
      if (tok.text.empty()) {
        if (std::string_view("(),*=<>+-/%.;&|~").find(c) == std::string_view::npos) {
          throw ParseFailure{i, std::string("unexpected character '") + c + "'"};
        }
        tok.text = std::string(1, c);
      }
      i += tok.text.size();
    }
    out.push_back(std::move(tok));
  }
  Token end;
  end.offset = s.size();
  out.push_back(end);
  return out;
}

constexpr std::array<std::string_view, 33> kReserved = {
    "SELECT", "FROM",   "WHERE",  "AND",       "OR",     "NOT",    "LIKE",  "IN",    "BETWEEN",
    "IS",     "NULL",   "GROUP",  "BY",        "ORDER",  "ASC",    "DESC",  "LIMIT", "OFFSET",
    "DISTINCT", "AS",   "ALL",    "JOIN",      "UNION",  "INTERSECT", "EXCEPT", "CASE", "WHEN",
    "THEN",   "ELSE",   "END",    "HAVING",    "ON",     "WITH"};

bool is_reserved(std::string_view upper_text) {
  return std::find(kReserved.begin(), kReserved.end(), upper_text) != kReserved.end();
}

std::optional<Aggregate> aggregate_named(std::string_view upper_text) {
  if (upper_text == "COUNT") return Aggregate::kCount;
  if (upper_text == "SUM") return Aggregate::kSum;
  if (upper_text == "AVG") return Aggregate::kAvg;
  if (upper_text == "MIN") return Aggregate::kMin;
  if (upper_text == "MAX") return Aggregate::kMax;
  return std::nullopt;
}

constexpr std::string_view aggregate_name(Aggregate a) {
  switch (a) {
    case Aggregate::kCount: return "COUNT";
    case Aggregate::kSum: return "SUM";
    case Aggregate::kAvg: return "AVG";
    case Aggregate::kMin: return "MIN";
    case Aggregate::kMax: return "MAX";
  }
  return "COUNT";
}

// ---- parser ----

class Parser {
 public:
  explicit Parser(const std::vector<Token>& toks) : toks_(toks) {}

  SqlQuery query() {
    SqlQuery q;
    expect_keyword("SELECT");
    if (accept_keyword("DISTINCT")) {
      q.distinct = true;
    } else {
      accept_keyword("ALL");
    }
    do {
      q.items.push_back(select_item());
    } while (accept_symbol(","));
    expect_keyword("FROM");
    q.from_table = identifier("table name");
    if (accept_keyword("WHERE")) q.where = or_expr();
    if (accept_keyword("GROUP")) {
      expect_keyword("BY");
      do {
        q.group_by.push_back(identifier("column"));
      } while (accept_symbol(","));
    }
    if (accept_keyword("ORDER")) {
      expect_keyword("BY");
      do {
        OrderItem item{term(), false};
        if (accept_keyword("DESC")) {
          item.descending = true;
        } else {
          accept_keyword("ASC");
        }
        q.order_by.push_back(std::move(item));
      } while (accept_symbol(","));
    }
    if (accept_keyword("LIMIT")) {
      q.limit = integer();
      if (accept_keyword("OFFSET")) q.offset = integer();
    }
    accept_symbol(";");
    if (peek().kind != Token::Kind::kEnd) fail("unexpected trailing input");
    return q;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  [[noreturn]] void fail(const std::string& reason) const { throw ParseFailure{peek().offset, reason}; }

  bool is_keyword(std::string_view kw) const {
    return peek().kind == Token::Kind::kIdent && peek().upper == kw;
  }
  bool accept_keyword(std::string_view kw) {
    if (!is_keyword(kw)) return false;
    ++pos_;
    return true;
  }
  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) fail("expected " + std::string(kw));
  }
  bool accept_symbol(std::string_view sym) {
    if (peek().kind != Token::Kind::kSymbol || peek().text != sym) return false;
    ++pos_;
    return true;
  }
  void expect_symbol(std::string_view sym) {
    if (!accept_symbol(sym)) fail("expected '" + std::string(sym) + "'");
  }

  std::string identifier(const char* what) {
    const Token& t = peek();
    if (t.kind == Token::Kind::kQuotedIdent || (t.kind == Token::Kind::kIdent && !is_reserved(t.upper))) {
      ++pos_;
      return t.text;
    }
    fail(std::string("expected ") + what);
  }

  std::int64_t integer() {
    const Token& t = peek();
    std::int64_t v = 0;
    if (t.kind == Token::Kind::kNumber) {
      auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (ec == std::errc() && ptr == t.text.data() + t.text.size() && v >= 0) {
        ++pos_;
        return v;
      }
    }
    fail("expected a non-negative integer");
  }

  SqlTerm term() {
    const Token& t = peek();
    if (t.kind == Token::Kind::kIdent && toks_[pos_ + 1].kind == Token::Kind::kSymbol &&
        toks_[pos_ + 1].text == "(") {
      auto agg = aggregate_named(t.upper);
      if (!agg) fail("unsupported function '" + t.text + "'");
      pos_ += 2;
      SqlTerm out;
      out.kind = SqlTerm::Kind::kAggregate;
      out.aggregate = *agg;
      if (accept_keyword("DISTINCT")) out.distinct = true;
      if (*agg == Aggregate::kCount && !out.distinct && accept_symbol("*")) {
        out.column.clear();
      } else {
        out.column = identifier("column");
      }
      expect_symbol(")");
      return out;
    }
    SqlTerm out;
    out.kind = SqlTerm::Kind::kColumn;
    out.column = identifier("column");
    return out;
  }

  SelectItem select_item() {
    SelectItem item;
    if (accept_symbol("*")) {
      item.term.kind = SqlTerm::Kind::kStar;
      return item;
    }
    item.term = term();
    if (accept_keyword("AS")) {
      item.alias = identifier("alias");
    } else if (peek().kind == Token::Kind::kQuotedIdent ||
               (peek().kind == Token::Kind::kIdent && !is_reserved(peek().upper))) {
      item.alias = identifier("alias");
    }
    return item;
  }

  SqlExprPtr or_expr() {
    auto left = and_expr();
    while (accept_keyword("OR")) {
      auto e = std::make_shared<SqlExpr>();
      e->kind = SqlExpr::Kind::kOr;
      e->left = left;
      e->right = and_expr();
      left = e;
    }
    return left;
  }

  SqlExprPtr and_expr() {
    auto left = not_expr();
    while (accept_keyword("AND")) {
      auto e = std::make_shared<SqlExpr>();
      e->kind = SqlExpr::Kind::kAnd;
      e->left = left;
      e->right = not_expr();
      left = e;
    }
    return left;
  }

  SqlExprPtr not_expr() {
    if (accept_keyword("NOT")) {
      auto e = std::make_shared<SqlExpr>();
      e->kind = SqlExpr::Kind::kNot;
      e->left = not_expr();
      return e;
    }
    return predicate();
  }

  std::optional<SqlLiteral> literal() {
    const Token& t = peek();
    if (t.kind == Token::Kind::kString) {
      ++pos_;
      return SqlLiteral{SqlLiteral::Kind::kText, t.text};
    }
    if (t.kind == Token::Kind::kIdent && t.upper == "NULL") {
      ++pos_;
      return SqlLiteral{SqlLiteral::Kind::kNull, "NULL"};
    }
    std::string sign;
    if (t.kind == Token::Kind::kSymbol && (t.text == "-" || t.text == "+") &&
        toks_[pos_ + 1].kind == Token::Kind::kNumber) {
      sign = t.text;
      ++pos_;
    }
    if (peek().kind == Token::Kind::kNumber) {
      std::string text = sign + next().text;
      bool is_int = text.find_first_of(".eE") == std::string::npos;
      if (is_int) {
        std::int64_t v = 0;
        std::string_view digits = text;
        if (digits.front() == '+') digits.remove_prefix(1);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
        is_int = ec == std::errc() && ptr == digits.data() + digits.size();
      }
      return SqlLiteral{is_int ? SqlLiteral::Kind::kInteger : SqlLiteral::Kind::kReal, text};
    }
    if (!sign.empty()) --pos_;
    return std::nullopt;
  }

  SqlOperand operand() {
    if (auto lit = literal()) return SqlOperand{false, {}, *lit};
    SqlOperand out;
    out.is_column = true;
    out.column = identifier("column or literal");
    return out;
  }

  SqlExprPtr predicate() {
    if (accept_symbol("(")) {
      auto inner = or_expr();
      expect_symbol(")");
      return inner;
    }
    auto e = std::make_shared<SqlExpr>();
    e->lhs = operand();
    if (accept_keyword("IS")) {
      e->kind = SqlExpr::Kind::kIsNull;
      e->negated = accept_keyword("NOT");
      expect_keyword("NULL");
      return e;
    }
    bool negated = accept_keyword("NOT");
    if (accept_keyword("LIKE")) {
      e->kind = SqlExpr::Kind::kLike;
      e->negated = negated;
      e->rhs = operand();
      return e;
    }
    if (accept_keyword("IN")) {
      e->kind = SqlExpr::Kind::kIn;
      e->negated = negated;
      expect_symbol("(");
      do {
        auto lit = literal();
        if (!lit) fail("IN lists hold literals only");
        e->list.push_back(*lit);
      } while (accept_symbol(","));
      expect_symbol(")");
      return e;
    }
    if (accept_keyword("BETWEEN")) {
      e->kind = SqlExpr::Kind::kBetween;
      e->negated = negated;
      e->rhs = operand();
      expect_keyword("AND");
      e->upper = operand();
      return e;
    }
    if (negated) fail("expected LIKE, IN or BETWEEN after NOT");
    static const std::array<std::pair<std::string_view, CompareOp>, 8> kOps = {{
        {"=", CompareOp::kEq}, {"==", CompareOp::kEq}, {"!=", CompareOp::kNe}, {"<>", CompareOp::kNe},
        {"<", CompareOp::kLt}, {"<=", CompareOp::kLe}, {">", CompareOp::kGt}, {">=", CompareOp::kGe}}};
    for (const auto& [sym, op] : kOps) {
      if (accept_symbol(sym)) {
        e->kind = SqlExpr::Kind::kCompare;
        e->op = op;
        e->rhs = operand();
        return e;
      }
    }
    fail("expected a comparison operator");
  }

  const std::vector<Token>& toks_;
  std::size_t pos_ = 0;
};

// Why a token stream that failed the subset grammar is still recognizably SQL.
std::optional<std::string> complexity_marker(const std::vector<Token>& toks) {
  if (toks.empty() || toks[0].kind != Token::Kind::kIdent ||
      (toks[0].upper != "SELECT" && toks[0].upper != "WITH")) {
    return std::nullopt;
  }
  static constexpr std::array<std::string_view, 12> kMarkers = {
      "JOIN", "UNION", "INTERSECT", "EXCEPT", "CASE", "HAVING", "WITH", "EXISTS", "CAST", "OVER", "WINDOW", "GLOB"};
  int selects = 0;
  bool in_from = false;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (t.kind == Token::Kind::kIdent) {
      if (t.upper == "SELECT" && ++selects > 1) return "subquery";
      if (std::find(kMarkers.begin(), kMarkers.end(), t.upper) != kMarkers.end()) {
        return ascii_lower(t.upper);
      }
      if (t.upper == "FROM") in_from = true;
      if (t.upper == "WHERE" || t.upper == "GROUP" || t.upper == "ORDER" || t.upper == "LIMIT") in_from = false;
      if (toks[i + 1].kind == Token::Kind::kSymbol && toks[i + 1].text == "(" && t.upper != "IN" &&
          !aggregate_named(t.upper)) {
        return "function " + ascii_lower(t.text);
      }
    } else if (t.kind == Token::Kind::kSymbol) {
      const std::string& s = t.text;
      if (s == "," && in_from) return "join";
      if (s == "." ) return "qualified name";
      if (s == "+" || s == "/" || s == "%" || s == "||" || s == "&" || s == "|" || s == "<<" || s == ">>") {
        return "arithmetic";
      }
      if (s == "-" && i > 0 && toks[i - 1].kind != Token::Kind::kSymbol &&
          !(toks[i - 1].kind == Token::Kind::kIdent && is_reserved(toks[i - 1].upper))) {
        return "arithmetic";
      }
      if (s == "*" && i > 0) {
        const Token& prev = toks[i - 1];
        bool star_ok = (prev.kind == Token::Kind::kSymbol && (prev.text == "(" || prev.text == ",")) ||
                       (prev.kind == Token::Kind::kIdent && (prev.upper == "SELECT" || prev.upper == "DISTINCT"));
        if (!star_ok) return "arithmetic";
      }
      if (s == "(" && i + 1 < toks.size() && toks[i + 1].kind == Token::Kind::kIdent &&
          toks[i + 1].upper == "SELECT") {
        return "subquery";
      }
    }
  }
  return std::nullopt;
}

std::string first_from_table(const std::vector<Token>& toks) {
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (toks[i].kind == Token::Kind::kIdent && toks[i].upper == "FROM" &&
        (toks[i + 1].kind == Token::Kind::kIdent || toks[i + 1].kind == Token::Kind::kQuotedIdent)) {
      return toks[i + 1].text;
    }
  }
  return {};
}

// ---- printer ----

std::string ident_text(const std::string& name) {
  bool plain = !name.empty() && ident_start(name[0]) &&
               std::all_of(name.begin(), name.end(), [](char c) { return ident_char(c) && c != '$'; }) &&
               !is_reserved(upper(name)) && !aggregate_named(upper(name));
  if (plain) return name;
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::string literal_text(const SqlLiteral& lit) {
  if (lit.kind == SqlLiteral::Kind::kNull) return "NULL";
  if (lit.kind != SqlLiteral::Kind::kText) return lit.text;
  std::string out = "'";
  for (char c : lit.text) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  return out + "'";
}

std::string operand_text(const SqlOperand& op) {
  return op.is_column ? ident_text(op.column) : literal_text(op.literal);
}

std::string term_text(const SqlTerm& t) {
  switch (t.kind) {
    case SqlTerm::Kind::kStar: return "*";
    case SqlTerm::Kind::kColumn: return ident_text(t.column);
    case SqlTerm::Kind::kAggregate: {
      std::string out(aggregate_name(t.aggregate));
      out += "(";
      if (t.distinct) out += "DISTINCT ";
      out += t.column.empty() ? "*" : ident_text(t.column);
      return out + ")";
    }
  }
  return {};
}

int precedence(const SqlExpr& e) {
  switch (e.kind) {
    case SqlExpr::Kind::kOr: return 1;
    case SqlExpr::Kind::kAnd: return 2;
    case SqlExpr::Kind::kNot: return 3;
    default: return 4;
  }
}

constexpr std::string_view op_text(CompareOp op) {
  switch (op) {
    case CompareOp::kEq: return "=";
    case CompareOp::kNe: return "!=";
    case CompareOp::kLt: return "<";
    case CompareOp::kLe: return "<=";
    case CompareOp::kGt: return ">";
    case CompareOp::kGe: return ">=";
  }
  return "=";
}

std::string wrap(const SqlExpr& e, bool parens) {
  std::string s = canonical_expr(e);
  return parens ? "(" + s + ")" : s;
}

bool operand_equal(const SqlExprPtr& a, const SqlExprPtr& b) {
  if (!a || !b) return !a && !b;
  return *a == *b;
}

// ---- evaluation ----

enum class Tri { kFalse, kTrue, kNull };

Tri tri_not(Tri t) {
  if (t == Tri::kNull) return t;
  return t == Tri::kTrue ? Tri::kFalse : Tri::kTrue;
}

Tri tri_and(Tri a, Tri b) {
  if (a == Tri::kFalse || b == Tri::kFalse) return Tri::kFalse;
  if (a == Tri::kNull || b == Tri::kNull) return Tri::kNull;
  return Tri::kTrue;
}

Tri tri_or(Tri a, Tri b) {
  if (a == Tri::kTrue || b == Tri::kTrue) return Tri::kTrue;
  if (a == Tri::kNull || b == Tri::kNull) return Tri::kNull;
  return Tri::kFalse;
}

bool sqlite_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

class WhereEvaluator {
 public:
  WhereEvaluator(const Table& t) : t_(t), cells_(t.n_rows()) {}

  Tri eval(const SqlExpr& e, std::size_t row) {
    switch (e.kind) {
      case SqlExpr::Kind::kAnd: {
        Tri a = eval(*e.left, row);
        if (a == Tri::kFalse) return a;
        return tri_and(a, eval(*e.right, row));
      }
      case SqlExpr::Kind::kOr: {
        Tri a = eval(*e.left, row);
        if (a == Tri::kTrue) return a;
        return tri_or(a, eval(*e.right, row));
      }
      case SqlExpr::Kind::kNot:
        return tri_not(eval(*e.left, row));
      case SqlExpr::Kind::kCompare:
        return compare(e.lhs, e.rhs, e.op, row);
      case SqlExpr::Kind::kBetween: {
        Tri r = tri_and(compare(e.lhs, e.rhs, CompareOp::kGe, row),
                        compare(e.lhs, e.upper, CompareOp::kLe, row));
        return e.negated ? tri_not(r) : r;
      }
      case SqlExpr::Kind::kLike: {
        SqlValue a = value(e.lhs, row);
        SqlValue b = value(e.rhs, row);
        if (a.type == SqlValue::Type::kNull || b.type == SqlValue::Type::kNull) return Tri::kNull;
        bool m = like_match(value_text(a), value_text(b));
        return (m != e.negated) ? Tri::kTrue : Tri::kFalse;
      }
      case SqlExpr::Kind::kIn: {
        SqlValue a = value(e.lhs, row);
        if (a.type == SqlValue::Type::kNull) return Tri::kNull;
        bool saw_null = false;
        Tri r = Tri::kFalse;
        for (const auto& lit : e.list) {
          SqlValue b = literal_value(lit);
          if (e.lhs.is_column && b.type == SqlValue::Type::kText) b = apply_numeric_affinity(b.s);
          if (b.type == SqlValue::Type::kNull) {
            saw_null = true;
            continue;
          }
          note_types(a, b);
          if (compare_values(a, b) == 0) {
            r = Tri::kTrue;
            break;
          }
        }
        if (r == Tri::kFalse && saw_null) r = Tri::kNull;
        return e.negated ? tri_not(r) : r;
      }
      case SqlExpr::Kind::kIsNull: {
        bool is_null = value(e.lhs, row).type == SqlValue::Type::kNull;
        return (is_null != e.negated) ? Tri::kTrue : Tri::kFalse;
      }
    }
    return Tri::kNull;
  }

  // Resolves every column reference up front so unknown columns fail even
  // where evaluation would short-circuit.
  void check(const SqlExpr& e) {
    auto col = [&](const SqlOperand& op) {
      if (op.is_column) column(op.column);
    };
    col(e.lhs);
    col(e.rhs);
    col(e.upper);
    if (e.left) check(*e.left);
    if (e.right) check(*e.right);
  }

  std::size_t type_mismatches = 0;

 private:
  std::size_t column(const std::string& name) {
    auto idx = resolve_column(name, t_.n_cols());
    if (!idx) throw Error(ErrorCode::kUnknownColumn, "no such column: " + name);
    return *idx;
  }

  SqlValue value(const SqlOperand& op, std::size_t row) {
    if (!op.is_column) return literal_value(op.literal);
    std::size_t c = column(op.column);
    auto& cached = cells_[row];
    if (cached.empty()) {
      for (std::size_t k = 0; k < t_.n_cols(); ++k) cached.push_back(apply_numeric_affinity(t_.raw(row, k)));
    }
    return cached[c];
  }

  void note_types(const SqlValue& a, const SqlValue& b) {
    if ((a.is_numeric() && b.type == SqlValue::Type::kText) ||
        (b.is_numeric() && a.type == SqlValue::Type::kText)) {
      ++type_mismatches;
    }
  }

  Tri compare(const SqlOperand& lhs, const SqlOperand& rhs, CompareOp op, std::size_t row) {
    SqlValue a = value(lhs, row);
    SqlValue b = value(rhs, row);
    // A NUMERIC column lends its affinity to a literal on the other side.
    if (lhs.is_column && !rhs.is_column && b.type == SqlValue::Type::kText) b = apply_numeric_affinity(b.s);
    if (rhs.is_column && !lhs.is_column && a.type == SqlValue::Type::kText) a = apply_numeric_affinity(a.s);
    if (a.type == SqlValue::Type::kNull || b.type == SqlValue::Type::kNull) return Tri::kNull;
    note_types(a, b);
    int c = compare_values(a, b);
    bool r = false;
    switch (op) {
      case CompareOp::kEq: r = c == 0; break;
      case CompareOp::kNe: r = c != 0; break;
      case CompareOp::kLt: r = c < 0; break;
      case CompareOp::kLe: r = c <= 0; break;
      case CompareOp::kGt: r = c > 0; break;
      case CompareOp::kGe: r = c >= 0; break;
    }
    return r ? Tri::kTrue : Tri::kFalse;
  }

  const Table& t_;
  std::vector<std::vector<SqlValue>> cells_;
};

std::vector<std::string> trimmed_sorted(const std::vector<std::string>& v) {
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(trim(s));
  std::sort(out.begin(), out.end());
  return out;
}

bool any_element_hit(const std::vector<NormalizedValue>& a, const std::vector<NormalizedValue>& b,
                     const GroundingConfig& cfg) {
  for (const auto& x : a) {
    for (const auto& y : b) {
      if (values_match(x, y, cfg)) return true;
    }
  }
  return false;
}

bool covers(const std::vector<NormalizedValue>& a, const std::vector<NormalizedValue>& b,
            const GroundingConfig& cfg) {
  return std::all_of(a.begin(), a.end(), [&](const auto& x) {
    return std::any_of(b.begin(), b.end(), [&](const auto& y) { return values_match(x, y, cfg); });
  });
}

std::vector<NormalizedValue> normalize_all(const std::vector<std::string>& v, const GroundingConfig& cfg) {
  std::vector<NormalizedValue> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(normalize(s, cfg));
  return out;
}

}  // namespace

bool operator==(const SqlExpr& a, const SqlExpr& b) {
  return a.kind == b.kind && a.negated == b.negated && a.op == b.op && a.lhs == b.lhs && a.rhs == b.rhs &&
         a.upper == b.upper && a.list == b.list && operand_equal(a.left, b.left) &&
         operand_equal(a.right, b.right);
}

SqlQuery parse_sql(std::string_view raw) {
  std::vector<Token> toks;
  try {
    toks = lex(raw);
  } catch (const ParseFailure& f) {
    throw SqlSyntaxError(f.offset, f.reason);
  }
  try {
    Parser p(toks);
    SqlQuery q = p.query();
    q.raw = std::string(raw);
    return q;
  } catch (const ParseFailure& f) {
    if (auto marker = complexity_marker(toks)) {
      SqlQuery q;
      q.raw = std::string(raw);
      q.complex_opaque = true;
      q.opaque_reason = *marker;
      q.from_table = first_from_table(toks);
      return q;
    }
    throw SqlSyntaxError(f.offset, f.reason);
  }
}

std::string canonical_expr(const SqlExpr& e) {
  const int p = precedence(e);
  switch (e.kind) {
    case SqlExpr::Kind::kOr:
    case SqlExpr::Kind::kAnd:
      return wrap(*e.left, precedence(*e.left) < p) + (e.kind == SqlExpr::Kind::kOr ? " OR " : " AND ") +
             wrap(*e.right, precedence(*e.right) <= p);
    case SqlExpr::Kind::kNot:
      return "NOT " + wrap(*e.left, precedence(*e.left) < p);
    case SqlExpr::Kind::kCompare:
      return operand_text(e.lhs) + " " + std::string(op_text(e.op)) + " " + operand_text(e.rhs);
    case SqlExpr::Kind::kLike:
      return operand_text(e.lhs) + (e.negated ? " NOT LIKE " : " LIKE ") + operand_text(e.rhs);
    case SqlExpr::Kind::kIn: {
      std::string out = operand_text(e.lhs) + (e.negated ? " NOT IN (" : " IN (");
      for (std::size_t i = 0; i < e.list.size(); ++i) {
        if (i > 0) out += ", ";
        out += literal_text(e.list[i]);
      }
      return out + ")";
    }
    case SqlExpr::Kind::kBetween:
      return operand_text(e.lhs) + (e.negated ? " NOT BETWEEN " : " BETWEEN ") + operand_text(e.rhs) +
             " AND " + operand_text(e.upper);
    case SqlExpr::Kind::kIsNull:
      return operand_text(e.lhs) + (e.negated ? " IS NOT NULL" : " IS NULL");
  }
  return {};
}

std::string canonical_sql(const SqlQuery& q) {
  if (q.complex_opaque) return q.raw;
  std::string out = "SELECT ";
  if (q.distinct) out += "DISTINCT ";
  for (std::size_t i = 0; i < q.items.size(); ++i) {
    if (i > 0) out += ", ";
    out += term_text(q.items[i].term);
    if (q.items[i].alias) out += " AS " + ident_text(*q.items[i].alias);
  }
  out += " FROM " + ident_text(q.from_table);
  if (q.where) out += " WHERE " + canonical_expr(*q.where);
  if (!q.group_by.empty()) {
    out += " GROUP BY ";
    for (std::size_t i = 0; i < q.group_by.size(); ++i) {
      if (i > 0) out += ", ";
      out += ident_text(q.group_by[i]);
    }
  }
  if (!q.order_by.empty()) {
    out += " ORDER BY ";
    for (std::size_t i = 0; i < q.order_by.size(); ++i) {
      if (i > 0) out += ", ";
      out += term_text(q.order_by[i].term) + (q.order_by[i].descending ? " DESC" : " ASC");
    }
  }
  if (q.limit) out += " LIMIT " + std::to_string(*q.limit);
  if (q.offset) out += " OFFSET " + std::to_string(*q.offset);
  return out;
}

bool classify_simple(const SqlQuery& q) {
  if (q.complex_opaque || !q.group_by.empty()) return false;
  return std::all_of(q.items.begin(), q.items.end(),
                     [](const SelectItem& it) { return it.term.kind != SqlTerm::Kind::kAggregate; });
}

SqlValue apply_numeric_affinity(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && sqlite_space(text[b])) ++b;
  while (e > b && sqlite_space(text[e - 1])) --e;
  std::string_view s = text.substr(b, e - b);
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size() && is_digit(s[i])) ++i, ++digits;
  bool pure_int = true;
  if (i < s.size() && s[i] == '.') {
    pure_int = false;
    ++i;
    while (i < s.size() && is_digit(s[i])) ++i, ++digits;
  }
  if (digits == 0) return SqlValue::text(std::string(text));
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    pure_int = false;
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < s.size() && is_digit(s[i])) ++i, ++exp_digits;
    if (exp_digits == 0) return SqlValue::text(std::string(text));
  }
  if (i != s.size()) return SqlValue::text(std::string(text));

  std::string_view body = s.front() == '+' ? s.substr(1) : s;
  if (pure_int) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
    if (ec == std::errc() && ptr == body.data() + body.size()) return SqlValue::integer(v);
  }
  double r = 0.0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), r);
  if (ec == std::errc::result_out_of_range) {
    r = std::strtod(std::string(body).c_str(), nullptr);
  } else if (ec != std::errc() || ptr != body.data() + body.size()) {
    return SqlValue::text(std::string(text));
  }
  constexpr double kTwo63 = 9223372036854775808.0;
  if (r > -kTwo63 && r < kTwo63 && r == std::trunc(r)) {
    return SqlValue::integer(static_cast<std::int64_t>(r));
  }
  return SqlValue::real(r);
}

SqlValue literal_value(const SqlLiteral& lit) {
  switch (lit.kind) {
    case SqlLiteral::Kind::kNull: return SqlValue::null();
    case SqlLiteral::Kind::kText: return SqlValue::text(lit.text);
    case SqlLiteral::Kind::kInteger: {
      std::int64_t v = 0;
      std::string_view s = lit.text;
      if (!s.empty() && s.front() == '+') s.remove_prefix(1);
      std::from_chars(s.data(), s.data() + s.size(), v);
      return SqlValue::integer(v);
    }
    case SqlLiteral::Kind::kReal: {
      std::string s = lit.text;
      if (!s.empty() && s.front() == '+') s.erase(0, 1);
      return SqlValue::real(std::strtod(s.c_str(), nullptr));
    }
  }
  return SqlValue::null();
}

std::string value_text(const SqlValue& v) {
  switch (v.type) {
    case SqlValue::Type::kNull: return {};
    case SqlValue::Type::kInteger: return std::to_string(v.i);
    case SqlValue::Type::kText: return v.s;
    case SqlValue::Type::kReal: {
      if (std::isinf(v.r)) return v.r > 0 ? "Inf" : "-Inf";
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.15g", v.r);
      std::string s = buf;
      auto epos = s.find('e');
      std::string mantissa = s.substr(0, epos);
      if (mantissa.find('.') == std::string::npos) mantissa += ".0";
      return epos == std::string::npos ? mantissa : mantissa + s.substr(epos);
    }
  }
  return {};
}

int compare_values(const SqlValue& a, const SqlValue& b) {
  auto rank = [](const SqlValue& v) {
    switch (v.type) {
      case SqlValue::Type::kNull: return 0;
      case SqlValue::Type::kInteger:
      case SqlValue::Type::kReal: return 1;
      case SqlValue::Type::kText: return 2;
    }
    return 0;
  };
  int ra = rank(a);
  int rb = rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  if (ra == 0) return 0;
  if (ra == 2) {
    std::size_t n = std::min(a.s.size(), b.s.size());
    int c = n == 0 ? 0 : std::memcmp(a.s.data(), b.s.data(), n);
    if (c != 0) return c < 0 ? -1 : 1;
    if (a.s.size() == b.s.size()) return 0;
    return a.s.size() < b.s.size() ? -1 : 1;
  }
  if (a.type == SqlValue::Type::kInteger && b.type == SqlValue::Type::kInteger) {
    return a.i < b.i ? -1 : (a.i > b.i ? 1 : 0);
  }
  if (a.type == SqlValue::Type::kReal && b.type == SqlValue::Type::kReal) {
    return a.r < b.r ? -1 : (a.r > b.r ? 1 : 0);
  }
  // Integer against real, without losing precision on large integers.
  bool flip = a.type == SqlValue::Type::kReal;
  std::int64_t i = flip ? b.i : a.i;
  double r = flip ? a.r : b.r;
  int c;
  if (r < -9223372036854775808.0) {
    c = 1;
  } else if (r >= 9223372036854775808.0) {
    c = -1;
  } else {
    auto y = static_cast<std::int64_t>(r);
    if (i < y) {
      c = -1;
    } else if (i > y) {
      c = 1;
    } else {
      auto s = static_cast<double>(i);
      c = s < r ? -1 : (s > r ? 1 : 0);
    }
  }
  return flip ? -c : c;
}

bool like_match(std::string_view text, std::string_view pattern) {
  auto fold = [](unsigned char c) { return (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c + 32) : c; };
  auto char_len = [](std::string_view s, std::size_t i) -> std::size_t {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t n = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    return std::min(n, s.size() - i);
  };
  std::size_t ti = 0;
  std::size_t pi = 0;
  std::size_t star_p = std::string_view::npos;
  std::size_t star_t = 0;
  while (ti < text.size()) {
    if (pi < pattern.size() && pattern[pi] == '%') {
      star_p = ++pi;
      star_t = ti;
      continue;
    }
    if (pi < pattern.size() && pattern[pi] == '_') {
      ++pi;
      ti += char_len(text, ti);
      continue;
    }
    if (pi < pattern.size() && fold(pattern[pi]) == fold(text[ti])) {
      ++pi;
      ++ti;
      continue;
    }
    if (star_p == std::string_view::npos) return false;
    pi = star_p;
    star_t += char_len(text, star_t);
    ti = star_t;
  }
  while (pi < pattern.size() && pattern[pi] == '%') ++pi;
  return pi == pattern.size();
}

std::optional<std::size_t> resolve_column(std::string_view name, std::size_t n_cols) {
  if (name.size() < 2 || (name[0] != 'c' && name[0] != 'C') || name[1] == '0') return std::nullopt;
  std::size_t k = 0;
  auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
  if (ec != std::errc() || ptr != name.data() + name.size() || k == 0 || k > n_cols) return std::nullopt;
  return k - 1;
}

WhereEvaluation evaluate_where(const Table& t, const SqlQuery& q) {
  if (q.complex_opaque) throw Error(ErrorCode::kNotSimple, "cannot evaluate an opaque query");
  WhereEvaluation out;
  if (!q.where) {
    for (std::size_t r = 0; r < t.n_rows(); ++r) out.rows.push_back(r);
    return out;
  }
  WhereEvaluator ev(t);
  ev.check(*q.where);
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    if (ev.eval(*q.where, r) == Tri::kTrue) out.rows.push_back(r);
  }
  out.type_mismatches = ev.type_mismatches;
  return out;
}

std::string target_table_name(const SqlQuery& q) { return q.from_table.empty() ? "w" : q.from_table; }

std::string_view to_string(OracleStatus s) { return s == OracleStatus::kOk ? "ok" : "exec_error"; }

std::string_view to_string(MismatchCategory c) {
  switch (c) {
    case MismatchCategory::kExact: return "exact";
    case MismatchCategory::kNormalizationFormat: return "normalization_format";
    case MismatchCategory::kMultiValue: return "multi_value";
    case MismatchCategory::kEmptySql: return "empty_sql";
    case MismatchCategory::kOther: return "other";
  }
  return "other";
}

bool soft_match(const std::vector<std::string>& oracle, const std::vector<std::string>& gold,
                const GroundingConfig& cfg) {
  auto o = normalize_all(oracle, cfg);
  auto g = normalize_all(gold, cfg);
  if (cfg.multivalue_policy == MultiValuePolicy::kAnyElement) return any_element_hit(o, g, cfg);
  if (o.empty() || g.empty()) return false;
  return covers(o, g, cfg) && covers(g, o, cfg);
}

MatchVerdict compare_denotation(const std::vector<std::string>& oracle,
                                const std::vector<std::string>& gold, const GroundingConfig& cfg) {
  MatchVerdict v;
  v.exact = trimmed_sorted(oracle) == trimmed_sorted(gold);
  v.soft = v.exact || soft_match(oracle, gold, cfg);
  if (v.exact) {
    v.category = MismatchCategory::kExact;
  } else if (std::all_of(oracle.begin(), oracle.end(), [](const auto& s) { return trim(s).empty(); })) {
    v.category = MismatchCategory::kEmptySql;
  } else if (oracle.size() != gold.size() &&
             any_element_hit(normalize_all(oracle, cfg), normalize_all(gold, cfg), cfg)) {
    v.category = MismatchCategory::kMultiValue;
  } else if (v.soft && oracle.size() == gold.size()) {
    v.category = MismatchCategory::kNormalizationFormat;
  } else {
    v.category = MismatchCategory::kOther;
  }
  return v;
}

bool denotation_em(const std::vector<std::string>& oracle, const std::vector<std::string>& gold) {
  auto norm = [](const std::vector<std::string>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(normalize_answer(s));
    std::sort(out.begin(), out.end());
    return out;
  };
  return norm(oracle) == norm(gold);
}

std::vector<ToleranceSetting> default_tolerance_settings() {
  return {{"strict", 1e-6, 0.0}, {"default", 1e-3, 0.01}, {"loose", 1e-2, 0.05}};
}

std::vector<std::pair<std::string, double>> tolerance_ablation(const std::vector<DenotationPair>& pairs,
                                                               const std::vector<ToleranceSetting>& settings,
                                                               const GroundingConfig& base) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& s : settings) {
    GroundingConfig cfg = base;
    cfg.numeric_abs_tol = s.abs_tol;
    cfg.numeric_rel_tol = s.rel_tol;
    cfg.validate();
    std::size_t resolved = 0;
    for (const auto& p : pairs) resolved += soft_match(p.oracle, p.gold, cfg) ? 1 : 0;
    out.emplace_back(s.name, pairs.empty() ? 0.0 : static_cast<double>(resolved) / static_cast<double>(pairs.size()));
  }
  return out;
}

double AccountingReport::execution_rate() const {
  return total == 0 ? 0.0 : static_cast<double>(executable) / static_cast<double>(total);
}
double AccountingReport::exact_rate() const {
  return executable == 0 ? 0.0 : static_cast<double>(exact) / static_cast<double>(executable);
}
double AccountingReport::soft_rate() const {
  return executable == 0 ? 0.0 : static_cast<double>(soft) / static_cast<double>(executable);
}
double AccountingReport::sql_target_em() const {
  return executable == 0 ? 0.0 : static_cast<double>(target_em) / static_cast<double>(executable);
}
std::optional<double> AccountingReport::soft_resolved_rate() const {
  if (mismatches == 0) return std::nullopt;
  return static_cast<double>(soft_resolved) / static_cast<double>(mismatches);
}
std::optional<double> AccountingReport::category_share(MismatchCategory c) const {
  if (mismatches == 0) return std::nullopt;
  auto it = categories.find(c);
  return it == categories.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(mismatches);
}

AccountingReport accounting(const std::vector<SqlOutcome>& results) {
  if (results.empty()) throw Error(ErrorCode::kInvalidArgument, "accounting needs at least one result");
  AccountingReport r;
  for (auto c : {MismatchCategory::kNormalizationFormat, MismatchCategory::kMultiValue,
                 MismatchCategory::kEmptySql, MismatchCategory::kOther}) {
    r.categories[c] = 0;
  }
  for (const auto& o : results) {
    ++r.total;
    if (o.status != OracleStatus::kOk) continue;
    ++r.executable;
    r.target_em += o.target_em ? 1 : 0;
    r.soft += o.verdict.soft ? 1 : 0;
    if (o.verdict.exact) {
      ++r.exact;
      continue;
    }
    ++r.mismatches;
    r.soft_resolved += o.verdict.soft ? 1 : 0;
    ++r.categories[o.verdict.category];
  }
  return r;
}

}  // namespace glean
