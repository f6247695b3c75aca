#include <sqlite3.h>

#include "glean/error.hpp"
#include "glean/io.hpp"
#include "glean/sql.hpp"

namespace glean {
namespace {

std::string quote_ident(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

void exec_or_throw(sqlite3* db, const std::string& sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw Error(ErrorCode::kIo, "sqlite: " + msg);
  }
}

struct StepBudget {
  std::uint64_t remaining;
};

int progress_callback(void* arg) {
  auto* budget = static_cast<StepBudget*>(arg);
  if (budget->remaining < 1000) return 1;
  budget->remaining -= 1000;
  return 0;
}

}  // namespace

Database::Database(Database&& other) noexcept : db_(other.db_) { other.db_ = nullptr; }

Database& Database::operator=(Database&& other) noexcept {
  if (this != &other) {
    if (db_) sqlite3_close(db_);
    db_ = other.db_;
    other.db_ = nullptr;
  }
  return *this;
}

Database::~Database() {
  if (db_) sqlite3_close(db_);
}

Database Database::from_table(const Table& t, const std::string& name) {
  sqlite3* raw = nullptr;
  if (sqlite3_open_v2(":memory:", &raw, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr) != SQLITE_OK) {
    std::string msg = raw ? sqlite3_errmsg(raw) : "out of memory";
    sqlite3_close(raw);
    throw Error(ErrorCode::kIo, "sqlite open failed: " + msg);
  }
  Database db(raw);
  std::string create = "CREATE TABLE " + quote_ident(name) + " (";
  std::string insert = "INSERT INTO " + quote_ident(name) + " (rowid";
  std::string params = "?";
  if (t.n_cols() == 0) create += "\"_empty\" NUMERIC";
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    std::string col = "c" + std::to_string(c + 1);
    create += (c > 0 ? ", " : "") + col + " NUMERIC";
    insert += ", " + col;
    params += ", ?";
  }
  create += ")";
  insert += ") VALUES (" + params + ")";
  exec_or_throw(raw, create);
  exec_or_throw(raw, "BEGIN");
  sqlite3_stmt* stmt = nullptr;
  if (sqlite3_prepare_v2(raw, insert.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
    throw Error(ErrorCode::kIo, std::string("sqlite prepare failed: ") + sqlite3_errmsg(raw));
  }
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    sqlite3_reset(stmt);
    sqlite3_bind_int64(stmt, 1, static_cast<sqlite3_int64>(r + 1));
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      const std::string& v = t.raw(r, c);
      sqlite3_bind_text(stmt, static_cast<int>(c + 2), v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    }
    if (sqlite3_step(stmt) != SQLITE_DONE) {
      std::string msg = sqlite3_errmsg(raw);
      sqlite3_finalize(stmt);
      throw Error(ErrorCode::kIo, "sqlite insert failed: " + msg);
    }
  }
  sqlite3_finalize(stmt);
  exec_or_throw(raw, "COMMIT");
  return db;
}

Database Database::open_file(const std::filesystem::path& path) {
  sqlite3* raw = nullptr;
  if (sqlite3_open_v2(path.string().c_str(), &raw, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
    std::string msg = raw ? sqlite3_errmsg(raw) : "out of memory";
    sqlite3_close(raw);
    throw Error(ErrorCode::kIo, "cannot open database " + path.string() + ": " + msg);
  }
  return Database(raw);
}

OracleResult Database::execute(const std::string& sql, std::uint64_t max_steps) const {
  OracleResult out;
  sqlite3_stmt* stmt = nullptr;
  auto fail = [&](std::string msg) {
    if (stmt) sqlite3_finalize(stmt);
    sqlite3_progress_handler(db_, 0, nullptr, nullptr);
    out.status = OracleStatus::kExecError;
    out.denotation.clear();
    out.error_msg = io::sanitize_utf8(msg);
    return out;
  };
  if (sqlite3_prepare_v2(db_, sql.c_str(), static_cast<int>(sql.size()), &stmt, nullptr) != SQLITE_OK) {
    return fail(sqlite3_errmsg(db_));
  }
  if (!stmt) return fail("empty statement");
  if (!sqlite3_stmt_readonly(stmt)) return fail("statement is not read-only");
  StepBudget budget{max_steps};
  sqlite3_progress_handler(db_, 1000, progress_callback, &budget);
  const int n_cols = sqlite3_column_count(stmt);
  while (true) {
    int rc = sqlite3_step(stmt);
    if (rc == SQLITE_DONE) break;
    if (rc != SQLITE_ROW) {
      return fail(rc == SQLITE_INTERRUPT ? "step budget exhausted" : sqlite3_errmsg(db_));
    }
    for (int c = 0; c < n_cols; ++c) {
      if (sqlite3_column_type(stmt, c) == SQLITE_NULL) {
        out.denotation.emplace_back();
        continue;
      }
      const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt, c));
      int len = sqlite3_column_bytes(stmt, c);
      out.denotation.push_back(io::sanitize_utf8(std::string_view(text ? text : "", static_cast<std::size_t>(len))));
    }
  }
  sqlite3_finalize(stmt);
  sqlite3_progress_handler(db_, 0, nullptr, nullptr);
  return out;
}

OracleResult execute_gold(const Database& db, const SqlQuery& q) { return db.execute(q.raw); }

std::vector<std::size_t> engine_where_rows(const Table& t, const SqlQuery& q) {
  if (q.complex_opaque) throw Error(ErrorCode::kNotSimple, "cannot project rows of an opaque query");
  const std::string name = target_table_name(q);
  Database db = Database::from_table(t, name);
  std::string sql = "SELECT rowid FROM " + quote_ident(name);
  if (q.where) sql += " WHERE " + canonical_expr(*q.where);
  sql += " ORDER BY rowid";
  OracleResult r = db.execute(sql);
  if (r.status != OracleStatus::kOk) throw Error(ErrorCode::kUnknownColumn, r.error_msg);
  std::vector<std::size_t> rows;
  for (const auto& v : r.denotation) rows.push_back(std::stoul(v) - 1);
  return rows;
}

}  // namespace glean
