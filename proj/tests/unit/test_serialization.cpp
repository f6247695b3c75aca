#include "doctest.h"

#include <set>
#include <string>
#include <vector>

#include "glean/error.hpp"
#include "glean/rng.hpp"
#include "glean/serialization.hpp"

using namespace glean;

namespace {

const Table kOne("t", {"h"}, {{"v"}});

std::string random_cell(Rng& rng, const std::string& alphabet) {
  std::string s;
  std::size_t len = rng.uniform_index(7);
  for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng.uniform_index(alphabet.size())]);
  return s;
}

Table random_table(Rng& rng, const std::string& alphabet) {
  std::size_t cols = 1 + rng.uniform_index(5);
  std::size_t rows = rng.uniform_index(6);
  std::vector<std::string> headers;
  for (std::size_t c = 0; c < cols; ++c) headers.push_back(random_cell(rng, alphabet));
  std::vector<std::vector<std::string>> grid(rows);
  for (auto& row : grid) {
    for (std::size_t c = 0; c < cols; ++c) row.push_back(random_cell(rng, alphabet));
  }
  return Table("parsed", headers, grid);
}

}  // namespace

TEST_CASE("emit goldens for a 1x1 table") {
  CHECK(emit(kOne, SerializationFormat::kCsv) == "h\nv\n");
  CHECK(emit(kOne, SerializationFormat::kKv) == "row 1: h = v\n");
  CHECK(emit(kOne, SerializationFormat::kJson) == R"({"headers":["h"],"rows":[["v"]]})");
  CHECK(emit(kOne, SerializationFormat::kTsv) == "h\nv\n");
  CHECK(emit(kOne, SerializationFormat::kMarkdown) == "| h |\n| --- |\n| v |\n");
  CHECK(emit(kOne, SerializationFormat::kHtml) ==
        "<table>\n<tr><th>h</th></tr>\n<tr><td>v</td></tr>\n</table>\n");
}

TEST_CASE("parse examples") {
  CHECK(parse("h\nv\n", SerializationFormat::kCsv, "t") == kOne);
  CHECK(parse("|h|\n|---|\n|v|", SerializationFormat::kMarkdown, "t") == kOne);
  CHECK_THROWS_AS(parse("|h|\n|v|", SerializationFormat::kMarkdown), MalformedInput);
}

TEST_CASE("MalformedInput carries format and line") {
  try {
    parse("a,b\n1,2,3\n", SerializationFormat::kCsv);
    FAIL("expected MalformedInput");
  } catch (const MalformedInput& e) {
    CHECK(e.format() == "csv");
    CHECK(e.line() == 2);
  }
}

TEST_CASE("short rows are padded and reported") {
  auto parsed = parse_table("a,b\n1\n2,3\n", SerializationFormat::kCsv);
  CHECK(parsed.padded_rows == std::vector<std::size_t>{0});
  CHECK(parsed.table.raw(0, 1).empty());
}

TEST_CASE("csv quoting doubles quotes") {
  Table t("t", {"a"}, {{"say \"hi\", ok"}});
  CHECK(emit(t, SerializationFormat::kCsv) == "a\n\"say \"\"hi\"\", ok\"\n");
}

TEST_CASE("kv without rows lists the columns") {
  Table t("t", {"a", "b"}, {});
  CHECK(emit(t, SerializationFormat::kKv) == "columns: a; b\n");
  CHECK(parse(emit(t, SerializationFormat::kKv), SerializationFormat::kKv, "t") == t);
}

TEST_CASE("html parser ignores attributes and decodes entities") {
  auto t = parse("<table border=\"1\"><tr><th class=\"x\">a &amp; b</th></tr><tr><td>&lt;1&gt;</td></tr></table>",
                 SerializationFormat::kHtml, "t");
  CHECK(t == Table("t", {"a & b"}, {{"<1>"}}));
}

TEST_CASE("format names round-trip") {
  for (auto f : kAllFormats) CHECK(parse_format(to_string(f)) == f);
  CHECK_THROWS_AS(parse_format("yaml"), Error);
}

TEST_CASE("property: round-trip on plain cells") {
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    auto t = random_table(rng, "abcXYZ019 .-");
    for (auto f : kAllFormats) {
      auto text = emit(t, f);
      CHECK_MESSAGE(parse(text, f) == t, to_string(f), "\n", text);
    }
  }
}

TEST_CASE("property: round-trip with reserved characters after escaping") {
  Rng rng(22);
  const std::string reserved = "ab |,\"\t\n\r\\;=<>&'";
  for (int i = 0; i < 300; ++i) {
    auto t = random_table(rng, reserved);
    for (auto f : kAllFormats) {
      auto text = emit(t, f);
      CHECK_MESSAGE(parse(text, f) == t, to_string(f), "\n", text);
    }
  }
}

TEST_CASE("property: emit is injective on distinct tables") {
  Rng rng(23);
  for (auto f : kAllFormats) {
    std::set<std::vector<std::vector<std::string>>> seen_grids;
    std::set<std::string> seen_text;
    std::size_t distinct = 0;
    for (int i = 0; i < 300; ++i) {
      auto t = random_table(rng, "ab |,;=\\");
      auto grid = t.raw_rows();
      grid.insert(grid.begin(), t.headers());
      if (!seen_grids.insert(grid).second) continue;
      ++distinct;
      seen_text.insert(emit(t, f));
    }
    CHECK(seen_text.size() == distinct);
  }
}

TEST_CASE("emit is deterministic") {
  Rng rng(24);
  auto t = random_table(rng, "abc,|");
  for (auto f : kAllFormats) CHECK(emit(t, f) == emit(t, f));
}
