#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "glean/error.hpp"
#include "glean/governance.hpp"
#include "glean/rng.hpp"

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

Example verdict(std::string id, std::string text) {
  Example ex;
  ex.id = std::move(id);
  ex.task = Task::kVerdict;
  ex.label = "entailed";
  ex.table_id = "t";
  ex.question = std::move(text);
  return ex;
}

std::string write_temp(const std::string& name, const std::string& body) {
  auto path = std::filesystem::temp_directory_path() / ("glean_gov_" + name);
  std::ofstream(path) << body;
  return path.string();
}

const std::string kRepoLfs = std::string(GLEAN_FIXTURE_DIR) + "/../../data/lfs.jsonl";

}  // namespace

TEST_CASE("coverage, abstention and conflict on a hand matrix") {
  LabelMatrix m;
  m.lf_names = {"a", "b"};
  for (int i = 0; i < 10; ++i) {
    m.ids.push_back("e" + std::to_string(i));
    m.votes.push_back({std::nullopt, std::nullopt});
  }
  m.votes[0] = {"refuted", std::nullopt};
  m.votes[1] = {"refuted", "entailed"};
  m.votes[2] = {std::nullopt, "entailed"};
  auto rep = governance_report(m, {{"e0", "refuted"}, {"e1", "refuted"}});
  CHECK(rep.coverage == doctest::Approx(0.3));
  CHECK(rep.abstention_rate == doctest::Approx(0.7));
  // one of the three covered examples has disagreeing votes
  CHECK(rep.conflict_rate == doctest::Approx(1.0 / 3.0));
  REQUIRE(rep.lf_accuracy.has_value());
  CHECK(*rep.lf_accuracy == doctest::Approx(2.0 / 3.0));
  CHECK(rep.per_lf[0].accuracy == 1.0);
  CHECK(rep.per_lf[1].accuracy == 0.0);
  CHECK_FALSE(rep.diagnostic_only);

  m.votes[1] = {"refuted", "refuted"};
  CHECK(governance_report(m, {}).conflict_rate == 0.0);
  CHECK_FALSE(governance_report(m, {}).lf_accuracy.has_value());
}

TEST_CASE("apply_lfs with the shipped catalog") {
  auto lfs = load_lfs(kRepoLfs);
  REQUIRE(lfs.size() == 7);
  std::vector<Example> ex = {verdict("1", "alice did not win"), verdict("2", "bob scored more than cy"),
                             verdict("3", "the sky is blue")};
  auto m = apply_lfs(lfs, ex, {});
  CHECK(m.votes[0][0] == std::optional<std::string>("refuted"));
  CHECK(m.votes[1][3] == std::optional<std::string>("entailed"));
  for (const auto& v : m.votes[2]) CHECK_FALSE(v.has_value());

  TableIndex tables;
  tables.emplace("t", Table("t", {"team", "pts"}, {{"Total", "9"}}));
  auto with_table = apply_lfs(lfs, {verdict("4", "owls scored 9")}, tables);
  CHECK(with_table.votes[0][6] == std::optional<std::string>("entailed"));
  CHECK(code_of([&] { apply_lfs({}, ex, {}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("property: coverage + abstention == 1 and a single LF never conflicts") {
  Rng rng(91);
  const std::vector<std::string> labels = {"entailed", "refuted"};
  for (int i = 0; i < 500; ++i) {
    LabelMatrix m;
    std::size_t k = 1 + rng.uniform_index(4);
    for (std::size_t j = 0; j < k; ++j) m.lf_names.push_back("lf" + std::to_string(j));
    std::size_t n = 1 + rng.uniform_index(30);
    for (std::size_t e = 0; e < n; ++e) {
      m.ids.push_back("e" + std::to_string(e));
      std::vector<std::optional<std::string>> row;
      for (std::size_t j = 0; j < k; ++j) {
        if (rng.coin()) {
          row.emplace_back(labels[rng.uniform_index(2)]);
        } else {
          row.emplace_back(std::nullopt);
        }
      }
      m.votes.push_back(row);
    }
    auto rep = governance_report(m, {});
    CHECK(rep.coverage + rep.abstention_rate == 1.0);
    CHECK(rep.conflict_rate >= 0.0);
    CHECK(rep.conflict_rate <= 1.0);
    CHECK(rep.diagnostic_only == (rep.coverage < kDiagnosticCoverage));
    if (k == 1) CHECK(rep.conflict_rate == 0.0);
  }
}

TEST_CASE("diagnostic_only below a quarter coverage") {
  LabelMatrix m;
  m.lf_names = {"a"};
  for (int i = 0; i < 5; ++i) {
    m.ids.push_back(std::to_string(i));
    m.votes.push_back({i == 0 ? std::optional<std::string>("x") : std::nullopt});
  }
  CHECK(governance_report(m, {}).diagnostic_only);
}

TEST_CASE("contrast rewrites") {
  CHECK(bias_strip("alice did not win") == "alice did win");
  CHECK(bias_strip("All teams won, not most") == "teams won,");
  CHECK(bias_strip("nothing notable") == "nothing notable");
  CHECK(comparator_swap("more points than") == "less points than");
  CHECK(comparator_swap("Higher and LOWER") == "Lower and HIGHER");
  CHECK(comparator_swap("moreover") == "moreover");

  auto set = contrast_set({verdict("1", "alice did not win"), verdict("2", "bob won")}, ContrastKind::kBiasStrip);
  CHECK(set.triggered == std::vector<bool>{true, false});
  CHECK(set.examples[1].question == "bob won");
  CHECK(parse_contrast_kind(to_string(ContrastKind::kComparatorSwap)) == ContrastKind::kComparatorSwap);
}

TEST_CASE("property: bias_strip is idempotent and comparator_swap is an involution") {
  Rng rng(92);
  const std::vector<std::string> words = {"not", "Not", "all", "most", "none", "more", "Less", "higher", "team",
                                          "won", ",", "  ", "NOT", "nothing", "lowest"};
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    for (std::size_t k = rng.uniform_index(8); k > 0; --k) s += words[rng.uniform_index(words.size())] + " ";
    auto once = bias_strip(s);
    CHECK(bias_strip(once) == once);
    CHECK(comparator_swap(comparator_swap(s)) == s);
  }
}

TEST_CASE("flip_rate examples") {
  std::map<std::string, std::string> before = {{"a", "x"}, {"b", "y"}, {"c", "z"}};
  CHECK(flip_rate(before, before, {"a", "b"}) == 0.0);
  std::map<std::string, std::string> after = {{"a", "q"}, {"b", "q"}, {"c", "z"}};
  CHECK(flip_rate(before, after, {"a", "b"}) == 1.0);
  CHECK(flip_rate(before, after, {"a", "b", "c"}) == doctest::Approx(2.0 / 3.0));
  CHECK(flip_rate(before, after, {}) == 0.0);
  CHECK(code_of([&] { flip_rate(before, {{"a", "x"}}, {"a"}); }) == ErrorCode::kIdMismatch);
  CHECK(code_of([&] { flip_rate(before, before, {"zz"}); }) == ErrorCode::kIdMismatch);
}

TEST_CASE("load_lfs errors") {
  auto dup = write_temp("dup.jsonl",
                        "{\"name\":\"a\",\"pattern\":\"x\",\"emit\":\"refuted\"}\n"
                        "{\"name\":\"a\",\"pattern\":\"y\",\"emit\":\"refuted\"}\n");
  CHECK(code_of([&] { load_lfs(dup); }) == ErrorCode::kDuplicateId);
  auto bad = write_temp("bad.jsonl", "{\"name\":\"a\",\"pattern\":\"(unclosed\",\"emit\":\"refuted\"}\n");
  CHECK(code_of([&] { load_lfs(bad); }) == ErrorCode::kBadPattern);
  CHECK(code_of([] { make_lf("a", "[", "x", LfScope::kBoth); }) == ErrorCode::kBadPattern);
}
