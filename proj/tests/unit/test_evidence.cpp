#include "doctest.h"

#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "glean/error.hpp"
#include "glean/evidence.hpp"
#include "glean/rng.hpp"
#include "glean/sql.hpp"

using namespace glean;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

EvidenceSet rows_of(std::vector<std::size_t> rows) {
  EvidenceSet e;
  e.rows = std::move(rows);
  return e;
}

// Brute-force predicate over a table with c1 = word, c2 = integer, c3 = decimal.
// Every generated comparison stays within one type, so plain C++ semantics
// apply and the interpreter needs no SQL knowledge.
struct Pred {
  enum Kind { kAnd, kOr, kNot, kWordEq, kWordNe, kWordPrefix, kIntCmp, kDecCmp, kIntBetween, kWordIn };
  Kind kind = kWordEq;
  std::string word;
  std::vector<std::string> words;
  int op = 0;  // 0 =, 1 <>, 2 <, 3 <=, 4 >, 5 >=
  double a = 0;
  double b = 0;
  std::shared_ptr<Pred> l;
  std::shared_ptr<Pred> r;
};

const char* kOps[] = {"=", "<>", "<", "<=", ">", ">="};
const std::vector<std::string> kWords = {"ann", "bob", "cy", "dee", "al"};

bool cmp(double x, int op, double y) {
  switch (op) {
    case 0: return x == y;
    case 1: return x != y;
    case 2: return x < y;
    case 3: return x <= y;
    case 4: return x > y;
    default: return x >= y;
  }
}

std::string num_text(double v) {
  std::string s = std::to_string(v);
  s.erase(s.find_last_not_of('0') + 1);
  if (s.back() == '.') s.pop_back();
  return s;
}

std::shared_ptr<Pred> random_pred(Rng& rng, int depth) {
  auto p = std::make_shared<Pred>();
  std::size_t pick = rng.uniform_index(depth > 0 ? 10 : 7);
  switch (pick) {
    case 0: p->kind = Pred::kWordEq; p->word = kWords[rng.uniform_index(kWords.size())]; break;
    case 1: p->kind = Pred::kWordNe; p->word = kWords[rng.uniform_index(kWords.size())]; break;
    case 2: p->kind = Pred::kWordPrefix; p->word = std::string(1, "abcd"[rng.uniform_index(4)]); break;
    case 3:
      p->kind = Pred::kIntCmp;
      p->op = static_cast<int>(rng.uniform_index(6));
      p->a = static_cast<double>(rng.uniform_index(10));
      break;
    case 4:
      p->kind = Pred::kDecCmp;
      p->op = static_cast<int>(rng.uniform_index(6));
      p->a = static_cast<double>(rng.uniform_index(40)) / 4.0;
      break;
    case 5:
      p->kind = Pred::kIntBetween;
      p->a = static_cast<double>(rng.uniform_index(10));
      p->b = p->a + static_cast<double>(rng.uniform_index(5));
      break;
    case 6:
      p->kind = Pred::kWordIn;
      p->words = {kWords[rng.uniform_index(kWords.size())], kWords[rng.uniform_index(kWords.size())]};
      break;
    case 7: p->kind = Pred::kAnd; break;
    case 8: p->kind = Pred::kOr; break;
    default: p->kind = Pred::kNot; break;
  }
  if (p->kind == Pred::kAnd || p->kind == Pred::kOr || p->kind == Pred::kNot) {
    p->l = random_pred(rng, depth - 1);
    if (p->kind != Pred::kNot) p->r = random_pred(rng, depth - 1);
  }
  return p;
}

std::string render(const Pred& p) {
  switch (p.kind) {
    case Pred::kAnd: return "(" + render(*p.l) + " AND " + render(*p.r) + ")";
    case Pred::kOr: return "(" + render(*p.l) + " OR " + render(*p.r) + ")";
    case Pred::kNot: return "NOT (" + render(*p.l) + ")";
    case Pred::kWordEq: return "c1 = '" + p.word + "'";
    case Pred::kWordNe: return "c1 != '" + p.word + "'";
    case Pred::kWordPrefix: return "c1 LIKE '" + p.word + "%'";
    case Pred::kIntCmp: return std::string("c2 ") + kOps[p.op] + " " + num_text(p.a);
    case Pred::kDecCmp: return std::string("c3 ") + kOps[p.op] + " " + num_text(p.a);
    case Pred::kIntBetween: return "c2 BETWEEN " + num_text(p.a) + " AND " + num_text(p.b);
    case Pred::kWordIn: return "c1 IN ('" + p.words[0] + "', '" + p.words[1] + "')";
  }
  return {};
}

struct NaiveRow {
  std::string word;
  double i = 0;
  double d = 0;
};

bool holds(const Pred& p, const NaiveRow& row) {
  switch (p.kind) {
    case Pred::kAnd: return holds(*p.l, row) && holds(*p.r, row);
    case Pred::kOr: return holds(*p.l, row) || holds(*p.r, row);
    case Pred::kNot: return !holds(*p.l, row);
    case Pred::kWordEq: return row.word == p.word;
    case Pred::kWordNe: return row.word != p.word;
    case Pred::kWordPrefix: return row.word.rfind(p.word, 0) == 0;
    case Pred::kIntCmp: return cmp(row.i, p.op, p.a);
    case Pred::kDecCmp: return cmp(row.d, p.op, p.a);
    case Pred::kIntBetween: return row.i >= p.a && row.i <= p.b;
    case Pred::kWordIn: return row.word == p.words[0] || row.word == p.words[1];
  }
  return false;
}

}  // namespace

TEST_CASE("detect_answer_rows examples") {
  GroundingConfig cfg;
  Table t("t", {"n", "s"}, {{"7", "x"}, {"8", "y"}});
  CHECK(detect_answer_rows(t, {"7"}, cfg).rows == std::vector<std::size_t>{0});
  Table cities("t", {"city"}, {{"Boston"}, {"New York City"}});
  CHECK(detect_answer_rows(cities, {"New York"}, cfg).rows == std::vector<std::size_t>{1});
  auto none = detect_answer_rows(t, {"42"}, cfg);
  CHECK(none.rows.empty());
  CHECK_FALSE(none.covered());
  CHECK(detect_answer_rows(t, {"!!"}, cfg).rows.empty());
  CHECK(detect_answer_rows(t, {"8", "7"}, cfg).rows == std::vector<std::size_t>{0, 1});
}

TEST_CASE("derive_sql_rows examples") {
  Table t("t", {"name", "score"}, {{"a", "1"}, {"b", "4"}, {"c", "5"}});
  CHECK(derive_sql_rows(t, parse_sql("SELECT c1 FROM w WHERE c2 > 3")).rows == std::vector<std::size_t>{1, 2});
  CHECK(code_of([&] { derive_sql_rows(t, parse_sql("SELECT COUNT(*) FROM w")); }) == ErrorCode::kNotSimple);
  CHECK(derive_sql_rows(t, parse_sql("SELECT c1 FROM w")).rows == std::vector<std::size_t>{0, 1, 2});
  CHECK(code_of([&] { derive_sql_rows(t, parse_sql("SELECT c1 FROM w WHERE c9 = 1")); }) ==
        ErrorCode::kUnknownColumn);
}

TEST_CASE("detect_hybrid examples") {
  GroundingConfig cfg;
  Table t("t", {"player", "team"}, {{"ann", "owls"}, {"bob", "hawks"}, {"cy", "owls"}});
  Example ex;
  ex.id = "e";
  ex.table_id = "t";
  ex.question = "did bob play for the hawks";
  ex.gold_answers = {"owls"};
  auto answer = detect_answer_rows(t, ex.gold_answers, cfg);
  auto hybrid = detect_hybrid(t, ex, cfg);
  CHECK(answer.rows == std::vector<std::size_t>{0, 2});
  CHECK(hybrid.rows == std::vector<std::size_t>{0, 1, 2});

  ex.gold_answers = {"eagles"};
  CHECK(detect_hybrid(t, ex, cfg).rows == std::vector<std::size_t>{1});

  ex.question = "zzz qqq";
  auto fallback = detect_hybrid(t, ex, cfg);
  CHECK(fallback.rows == std::vector<std::size_t>{0});
  CHECK(fallback.mode == EvidenceMode::kHybrid);
}

TEST_CASE("property: hybrid evidence contains answer evidence") {
  Rng rng(51);
  GroundingConfig cfg;
  const std::vector<std::string> vocab = {"ann", "bob", "owls", "7", "12", "hawks", "cy", "3.5"};
  for (int i = 0; i < 500; ++i) {
    std::vector<std::vector<std::string>> rows;
    std::size_t n = 1 + rng.uniform_index(6);
    for (std::size_t r = 0; r < n; ++r) {
      rows.push_back({vocab[rng.uniform_index(vocab.size())], vocab[rng.uniform_index(vocab.size())]});
    }
    Table t("t", {"a", "b"}, rows);
    Example ex;
    ex.id = "e";
    ex.table_id = "t";
    ex.question = vocab[rng.uniform_index(vocab.size())] + " or " + vocab[rng.uniform_index(vocab.size())];
    ex.gold_answers = {vocab[rng.uniform_index(vocab.size())]};
    auto answer = detect_answer_rows(t, ex.gold_answers, cfg);
    auto hybrid = detect_hybrid(t, ex, cfg, 0.2);
    CHECK(hybrid.covered());
    for (auto r : answer.rows) {
      CHECK(std::find(hybrid.rows.begin(), hybrid.rows.end(), r) != hybrid.rows.end());
    }
  }
}

TEST_CASE("evidence_coverage examples") {
  CHECK(evidence_coverage({rows_of({1}), rows_of({}), rows_of({0, 2}), rows_of({})}) == 0.5);
  CHECK(code_of([] { evidence_coverage({}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("validate_detector examples") {
  std::vector<IdEvidence> gold = {{"a", rows_of({0})}, {"b", rows_of({3})}};
  auto same = validate_detector(gold, gold);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  std::vector<IdEvidence> wider = {{"b", rows_of({1, 3})}, {"a", rows_of({0, 2})}};
  auto w = validate_detector(wider, gold);
  CHECK(w.precision == 0.5);
  CHECK(w.recall == 1.0);
  CHECK(code_of([&] { validate_detector({{"a", rows_of({0})}}, gold); }) == ErrorCode::kIdMismatch);
}

TEST_CASE("property: validate_detector(x, x) = (1, 1)") {
  Rng rng(52);
  for (int i = 0; i < 200; ++i) {
    std::vector<IdEvidence> x;
    std::size_t n = 1 + rng.uniform_index(5);
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<std::size_t> rows = {rng.uniform_index(3)};
      if (rng.coin()) rows.push_back(3 + rng.uniform_index(3));
      x.push_back({"id" + std::to_string(k), rows_of(rows)});
    }
    auto s = validate_detector(x, x);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
  }
}

TEST_CASE("audit_kappa over shared items") {
  // a = [s,s,n,n], b = [s,n,s,n]: p_o = 0.5, p_e = 0.5 -> kappa 0.
  std::vector<AuditJudgment> j = {
      {"e1", 0, "supported", "a"},     {"e1", 0, "supported", "b"},     {"e2", 0, "supported", "a"},
      {"e2", 0, "not_supported", "b"}, {"e3", 1, "not_supported", "a"}, {"e3", 1, "supported", "b"},
      {"e4", 1, "not_supported", "a"}, {"e4", 1, "not_supported", "b"}, {"e5", 0, "supported", "a"},
  };
  CHECK(audit_kappa(j, "a", "b") == doctest::Approx(0.0));
  CHECK(code_of([&] { audit_kappa(j, "a", "c"); }) == ErrorCode::kIdMismatch);
}

TEST_CASE("property: derive_sql_rows agrees with a brute-force row filter") {
  Rng rng(53);
  for (int i = 0; i < 400; ++i) {
    std::size_t n = 1 + rng.uniform_index(8);
    std::vector<NaiveRow> naive;
    std::vector<std::vector<std::string>> grid;
    for (std::size_t r = 0; r < n; ++r) {
      NaiveRow row{kWords[rng.uniform_index(kWords.size())], static_cast<double>(rng.uniform_index(10)),
                   static_cast<double>(rng.uniform_index(40)) / 4.0};
      grid.push_back({row.word, num_text(row.i), num_text(row.d)});
      naive.push_back(row);
    }
    Table t("t", {"name", "count", "ratio"}, grid);
    auto pred = random_pred(rng, 3);
    std::string sql = "SELECT * FROM w WHERE " + render(*pred);
    std::vector<std::size_t> expect;
    for (std::size_t r = 0; r < n; ++r) {
      if (holds(*pred, naive[r])) expect.push_back(r);
    }
    CHECK_MESSAGE(derive_sql_rows(t, parse_sql(sql)).rows == expect, sql);
  }
}
