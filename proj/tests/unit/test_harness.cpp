#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glean/error.hpp"
#include "glean/harness.hpp"
#include "glean/io.hpp"
#include "glean/synth.hpp"

using namespace glean;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kFixtures = GLEAN_FIXTURE_DIR;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("glean_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BundlePaths fixture_paths() { return load_manifest(kFixtures / "manifest.json").inputs; }

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string line; std::getline(ss, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("ingest the fixture bundle") {
  auto b = ingest(fixture_paths());
  CHECK(b.tables.size() == 3);
  REQUIRE(b.examples.size() == 6);
  CHECK(b.examples.front().id == "q1");
  CHECK(b.gold_sql.size() == 4);
  CHECK(b.find("q2")->gold_sql == std::optional<std::string>("SELECT c1 FROM w ORDER BY c3 DESC LIMIT 1"));
  CHECK(b.predictions.at("m1").size() == 7);
  CHECK(b.predictions.at("m1").count("q1::paraphrase") == 1);
  CHECK(b.embeddings.at("q1").row_vecs.size() == 3);
  CHECK(b.classifier_scores.at("clf").at("v1") == 0.8);
  CHECK(b.judgments.size() == 6);
  CHECK(b.find("zz") == nullptr);
}

TEST_CASE("ingest rejects duplicates and dangling references") {
  auto dir = scratch("bad_ingest");
  auto paths = fixture_paths();

  io::write_text(dir / "dup.jsonl", slurp(paths.examples) + slurp(paths.examples));
  auto dup = paths;
  dup.examples = dir / "dup.jsonl";
  CHECK(code_of([&] { ingest(dup); }) == ErrorCode::kDuplicateId);

  io::write_text(dir / "dangling.jsonl",
                 "{\"id\":\"x\",\"task\":\"qa\",\"question\":\"q\",\"gold_answers\":[\"a\"],\"table_id\":\"nope\"}\n");
  auto dangling = paths;
  dangling.examples = dir / "dangling.jsonl";
  CHECK(code_of([&] { ingest(dangling); }) == ErrorCode::kDanglingReference);

  io::write_text(dir / "preds.jsonl", "{\"id\":\"q9\",\"prediction\":\"x\"}\n");
  auto preds = paths;
  preds.predictions["bad"] = dir / "preds.jsonl";
  CHECK(code_of([&] { ingest(preds); }) == ErrorCode::kDanglingReference);

  io::write_text(dir / "broken.jsonl", "{\"id\":\"q1\",\"prediction\":[1]}\n");
  auto broken = paths;
  broken.predictions["bad"] = dir / "broken.jsonl";
  try {
    ingest(broken);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 1);
  }
}

TEST_CASE("derived_source resolves probe and contrast suffixes only") {
  CHECK(derived_source("q1::paraphrase") == std::optional<std::string>("q1"));
  CHECK(derived_source("a::b::bias_strip") == std::optional<std::string>("a::b"));
  CHECK_FALSE(derived_source("q1::unknown").has_value());
  CHECK_FALSE(derived_source("q1").has_value());
  CHECK_FALSE(derived_source("::paraphrase").has_value());
}

TEST_CASE("stratified_sample") {
  auto b = synth_generate(60, 5);
  auto s = stratified_sample(b.examples, 4, 9);
  std::map<std::string, int> per;
  for (const auto& ex : s) ++per[ex.task == Task::kQa ? "qa" : ex.label];
  for (const auto& [label, n] : per) CHECK(n == 4);
  CHECK(std::is_sorted(s.begin(), s.end(), [](const Example& a, const Example& c) { return a.id < c.id; }));
  CHECK(s == stratified_sample(b.examples, 4, 9));
}

TEST_CASE("synthetic bundle: planted predictions are perfect") {
  auto b = synth_generate(200, 11);
  CHECK(b.tables.size() == 200);
  CHECK(b.examples.size() == 400);
  RunManifest m;
  m.global_seed = 11;
  m.bootstrap_resamples = 100;
  auto dir = scratch("synth");
  auto r = run(m, b, dir, 2);
  CHECK(r.exit_code == 0);
  CHECK(r.failed_examples == 0);
  const json& planted = r.report.at("metrics").at("models").at(kPlantedModel);
  CHECK(planted.at("em") == 1.0);
  CHECK(planted.at("f1") == 1.0);
  CHECK(r.report.at("evidence").at("coverage") == 1.0);
  CHECK(r.report.at("attribution").at(kPlantedModel).at("all").at("OK") == 1.0);
}

TEST_CASE("full fixture run") {
  auto m = load_manifest(kFixtures / "manifest.json");
  auto dir = scratch("full");
  auto r = run(m, dir, 1);
  CHECK(r.exit_code == 0);
  for (const char* section : {"run", "counts", "probes", "retrieval", "metrics", "evidence", "sql", "attribution",
                              "governance", "provenance"}) {
    CHECK_MESSAGE(r.report.contains(section), section);
  }
  CHECK(r.report.at("metrics").at("models").at("m1").at("em") == 0.5);
  const json& attr = r.report.at("attribution").at("m1").at("all");
  CHECK(attr.at("OK") == 0.5);
  CHECK(attr.at("L2") == 0.25);
  CHECK(attr.at("L3") == 0.25);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "summary.md"));
  CHECK(fs::exists(dir / "stages" / "sql.jsonl"));

  auto v = verify(dir);
  CHECK(v.ok());
  CHECK(v.checked > 10);

  // Tampering with a stage file is caught.
  io::write_text(dir / "stages" / "sql.jsonl", "{}\n");
  CHECK_FALSE(verify(dir).ok());
}

TEST_CASE("disabling sql drops accounting and falls back to gold answers") {
  auto m = load_manifest(kFixtures / "manifest.json");
  m.stages.sql = false;
  auto dir = scratch("nosql");
  auto r = run(m, dir, 1);
  CHECK_FALSE(r.report.contains("sql"));
  const json& sources = r.report.at("attribution").at("m1").at("oracle_sources");
  CHECK(sources.size() == 1);
  CHECK(sources.at("gold_answer") == 4);
  for (const auto& row : io::read_jsonl(dir / "stages" / "attribution.m1.jsonl")) {
    CHECK(row.at("oracle_source") == "gold_answer");
  }
}

TEST_CASE("outputs do not depend on the worker count") {
  auto b = synth_generate(40, 3);
  RunManifest m;
  m.global_seed = 3;
  m.bootstrap_resamples = 100;
  auto one = scratch("w1");
  auto eight = scratch("w8");
  run(m, b, one, 1);
  run(m, b, eight, 8);
  CHECK(slurp(one / "report.json") == slurp(eight / "report.json"));
  for (const auto& entry : fs::directory_iterator(one / "stages")) {
    CHECK_MESSAGE(slurp(entry.path()) == slurp(eight / "stages" / entry.path().filename()), entry.path());
  }
}

TEST_CASE("plot CSVs") {
  auto m = load_manifest(kFixtures / "manifest.json");
  auto r = run(m, scratch("plots"), 1);
  auto plots = emit_plots(r.report);
  CHECK(plots.size() == 4);

  auto attr = csv_lines(plots.at("attribution.csv"));
  CHECK(attr.front() == "model,label,share");
  double total = 0;
  for (std::size_t i = 1; i < attr.size(); ++i) total += std::stod(attr[i].substr(attr[i].rfind(',') + 1));
  CHECK(total == doctest::Approx(1.0));

  CHECK(csv_lines(plots.at("qa_bars.csv")).front() == "model,metric,value,ci_lo,ci_hi");
  CHECK(csv_lines(plots.at("qa_bars.csv")).size() == 3);
  CHECK(csv_lines(plots.at("recall_em.csv")).front() == "retriever,recall@10,em");
  CHECK(csv_lines(plots.at("contamination.csv")).front() == "probe,metric,before,after,delta");

  auto empty = emit_plots(json{{"provenance", json::object()}});
  CHECK(empty.at("qa_bars.csv") == "model,metric,value,ci_lo,ci_hi\n");
}

TEST_CASE("manifest validation") {
  json j = {{"inputs", {{"tables", "a.jsonl"}, {"examples", "b.jsonl"}}}};
  auto m = manifest_from_json(j, "/base");
  CHECK(m.inputs.tables == fs::path("/base/a.jsonl"));
  CHECK(m.grounding.numeric_rel_tol == 0.01);

  json unknown = j;
  unknown["retreivers"] = json::array({"bm25"});
  CHECK_THROWS_AS(manifest_from_json(unknown, "/base"), SchemaError);

  json ill = j;
  ill["global_seed"] = "seven";
  CHECK_THROWS_AS(manifest_from_json(ill, "/base"), SchemaError);

  json grounding = j;
  grounding["grounding"] = {{"numeric_rel_tol", 0.0}, {"multivalue_policy", "all"}};
  auto g = manifest_from_json(grounding, "/base").grounding;
  CHECK(g.numeric_rel_tol == 0.0);
  CHECK(g.multivalue_policy == MultiValuePolicy::kAllElements);
  CHECK(grounding_from_json(to_json(g)).numeric_rel_tol == 0.0);
}

TEST_CASE("artifact detector on content-independent labels") {
  auto b = synth_generate(300, 21);
  auto r = artifact_detector(b.examples, b.tables, 21, 0.5);
  CHECK(r.n_train + r.n_test == 300);
  CHECK(r.held_out.accuracy > 0.35);
  CHECK(r.held_out.accuracy < 0.65);
  auto no_bias = artifact_detector(b.examples, b.tables, 21, 0.5, kAllFeatures & ~kBiasFeatures);
  CHECK(no_bias.model.slots.size() + 7 == r.model.slots.size());
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  parallel_for(0, 4, [&](std::size_t) { FAIL("no work expected"); });
}
