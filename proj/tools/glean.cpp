// glean: command-line front end for the evaluation harness.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "glean/bundle.hpp"
#include "glean/error.hpp"
#include "glean/harness.hpp"
#include "glean/io.hpp"
#include "glean/serialization.hpp"
#include "glean/synth.hpp"

namespace fs = std::filesystem;
using glean::io::json;

namespace {

struct InputFlags {
  std::string tables;
  std::string examples;
  std::vector<std::string> predictions;  // tag=path
  std::string gold_sql;
  std::string embeddings;
  std::vector<std::string> classifier_scores;
  std::vector<std::string> row_scores;
  std::string judgments;
};

struct CommonFlags {
  std::uint64_t seed = 0;
  std::size_t budget = 1024;
  std::vector<std::size_t> ks = {1, 2, 5, 10};
  std::string retriever = "bm25";
  std::string evidence_mode = "answer_string";
  std::string grounding_config;
  std::string out = "glean-out";
};

std::map<std::string, fs::path> tagged(const std::vector<std::string>& specs, const char* flag) {
  std::map<std::string, fs::path> out;
  for (const auto& s : specs) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw glean::Error(glean::ErrorCode::kInvalidArgument, std::string(flag) + " expects tag=path, got '" + s + "'");
    }
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

void add_inputs(CLI::App* app, InputFlags& in, bool require_tables = true) {
  auto* t = app->add_option("--tables", in.tables, "table JSONL");
  auto* e = app->add_option("--examples", in.examples, "example JSONL");
  if (require_tables) {
    t->required();
    e->required();
  }
  app->add_option("--predictions", in.predictions, "model predictions as tag=path (repeatable)");
  app->add_option("--gold-sql", in.gold_sql, "gold SQL JSONL");
  app->add_option("--embeddings", in.embeddings, "embedding JSONL for dense retrieval");
  app->add_option("--scores", in.classifier_scores, "classifier scores as tag=path (repeatable)");
  app->add_option("--row-scores", in.row_scores, "external row scores as tag=path (repeatable)");
  app->add_option("--judgments", in.judgments, "audit judgments JSONL");
}

void add_common(CLI::App* app, CommonFlags& c) {
  app->add_option("--seed", c.seed, "global seed");
  app->add_option("--budget", c.budget, "table token budget")->check(CLI::IsMember({512, 1024, 2048}));
  app->add_option("--k", c.ks, "Recall@K cutoffs")->delimiter(',');
  app->add_option("--retriever", c.retriever, "retriever name");
  app->add_option("--evidence-mode", c.evidence_mode, "answer|sql|hybrid")
      ->check(CLI::IsMember({"answer", "answer_string", "sql", "hybrid"}));
  app->add_option("--grounding-config", c.grounding_config, "grounding config JSON file");
  app->add_option("--out", c.out, "output directory");
}

glean::BundlePaths bundle_paths(const InputFlags& in) {
  glean::BundlePaths p;
  p.tables = in.tables;
  p.examples = in.examples;
  p.predictions = tagged(in.predictions, "--predictions");
  p.classifier_scores = tagged(in.classifier_scores, "--scores");
  p.row_scores = tagged(in.row_scores, "--row-scores");
  if (!in.gold_sql.empty()) p.gold_sql = in.gold_sql;
  if (!in.embeddings.empty()) p.embeddings = in.embeddings;
  if (!in.judgments.empty()) p.judgments = in.judgments;
  return p;
}

/// Manifest for a single-stage subcommand; every stage starts disabled.
glean::RunManifest stage_manifest(const InputFlags& in, const CommonFlags& c, const std::string& name) {
  glean::RunManifest m;
  m.run_id = name;
  m.global_seed = c.seed;
  m.inputs = bundle_paths(in);
  m.stages = {false, false, false, false, false, false, false};
  m.budget.max_table_tokens = c.budget;
  m.ks = c.ks;
  m.retrievers = {c.retriever};
  m.prune_retriever = c.retriever;
  m.evidence_mode = glean::parse_evidence_mode(c.evidence_mode);
  if (!c.grounding_config.empty()) {
    m.grounding = glean::grounding_from_json(json::parse(glean::io::read_text(c.grounding_config)));
  }
  m.source = {{"subcommand", name}};
  return m;
}

int run_and_print(const glean::RunManifest& m, const std::string& out, const std::vector<std::string>& sections) {
  auto result = glean::run(m, out, glean::workers_from_env());
  json view = json::object();
  for (const auto& s : sections) {
    if (result.report.contains(s)) view[s] = result.report.at(s);
  }
  view["counts"] = result.report.at("counts");
  std::cout << glean::io::dump_pretty(view);
  if (result.exit_code != 0) {
    std::cerr << "glean: " << result.failed_examples << " examples failed (see " << out
              << "/stages/errors.jsonl)\n";
  }
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glean: evaluation harness for tabular reasoning"};
  app.require_subcommand(1);
  InputFlags in;
  CommonFlags c;
  int code = 0;

  auto* ingest = app.add_subcommand("ingest", "validate a dataset bundle and report counts");
  add_inputs(ingest, in);
  std::size_t per_label = 0;
  std::string sample_out;
  ingest->add_option("--sample-per-label", per_label, "label-stratified sample size per label");
  ingest->add_option("--seed", c.seed, "sampling seed");
  ingest->add_option("--out", sample_out, "write the (sampled) bundle here");
  ingest->callback([&] {
    auto b = glean::ingest(bundle_paths(in));
    if (per_label > 0) b.examples = glean::stratified_sample(b.examples, per_label, c.seed);
    json counts = {{"tables", b.tables.size()}, {"examples", b.examples.size()}, {"gold_sql", b.gold_sql.size()},
                   {"embeddings", b.embeddings.size()}, {"judgments", b.judgments.size()}};
    for (const auto& [tag, p] : b.predictions) counts["predictions"][tag] = p.size();
    if (!sample_out.empty()) glean::write_bundle(b, sample_out);
    std::cout << glean::io::dump_pretty(counts);
  });

  auto* synth = app.add_subcommand("synth", "generate a synthetic bundle with planted predictions");
  std::size_t n = 200;
  synth->add_option("--n", n, "number of synthetic tables")->check(CLI::PositiveNumber);
  synth->add_option("--seed", c.seed, "generator seed");
  synth->add_option("--out", c.out, "output directory");
  synth->callback([&] {
    auto b = glean::synth_generate(n, c.seed);
    auto p = glean::write_bundle(b, c.out);
    json manifest = {{"run_id", "synth"},
                     {"dataset", "synth"},
                     {"global_seed", c.seed},
                     {"inputs",
                      {{"tables", p.tables.filename().string()},
                       {"examples", p.examples.filename().string()},
                       {"gold_sql", p.gold_sql->filename().string()},
                       {"predictions", {{glean::kPlantedModel, p.predictions.at(glean::kPlantedModel).filename().string()}}},
                       {"lfs", std::string(GLEAN_DATA_DIR) + "/lfs.jsonl"},
                       {"templates", std::string(GLEAN_DATA_DIR) + "/paraphrase_templates.jsonl"}}}};
    glean::io::write_text(fs::path(c.out) / "manifest.json", glean::io::dump_pretty(manifest));
    std::cout << "wrote " << b.tables.size() << " tables and " << b.examples.size() << " examples to " << c.out << "\n";
  });

  auto* probe = app.add_subcommand("probe", "generate contamination probes");
  add_inputs(probe, in);
  add_common(probe, c);
  std::string kind, templates;
  probe->add_option("--kind", kind, "probe kind")->required();
  probe->add_option("--templates", templates, "paraphrase template JSONL");
  probe->callback([&] {
    auto m = stage_manifest(in, c, "probe");
    m.stages.probes = true;
    m.probes = {glean::parse_probe_kind(kind)};
    if (!templates.empty()) m.templates = templates;
    code = run_and_print(m, c.out, {"probes"});
  });

  for (const char* name : {"retrieve", "prune", "requests"}) {
    auto* sub = app.add_subcommand(name, std::string(name) == "retrieve" ? "rank rows and report Recall@K"
                                         : std::string(name) == "prune"  ? "budgeted row and column pruning"
                                                                          : "emit inference requests from pruned contexts");
    add_inputs(sub, in);
    add_common(sub, c);
    sub->callback([&, name] {
      auto m = stage_manifest(in, c, name);
      m.stages.retrieval = true;
      code = run_and_print(m, c.out, {"retrieval"});
      if (std::string(name) == "requests") {
        fs::copy_file(fs::path(c.out) / "stages" / "requests.jsonl", fs::path(c.out) / "requests.jsonl",
                      fs::copy_options::overwrite_existing);
      }
    });
  }

  auto* evaluate = app.add_subcommand("evaluate", "EM/F1 with bootstrap CIs and classifier metrics");
  add_inputs(evaluate, in);
  add_common(evaluate, c);
  evaluate->callback([&] {
    auto m = stage_manifest(in, c, "evaluate");
    m.stages.metrics = true;
    code = run_and_print(m, c.out, {"metrics"});
  });

  auto* evidence = app.add_subcommand("evidence", "evidence rows, coverage and detector validation");
  add_inputs(evidence, in);
  add_common(evidence, c);
  evidence->callback([&] {
    auto m = stage_manifest(in, c, "evidence");
    m.stages.evidence = true;
    code = run_and_print(m, c.out, {"evidence"});
  });

  auto* sql = app.add_subcommand("sql-audit", "execute gold SQL and report oracle accounting");
  add_inputs(sql, in);
  add_common(sql, c);
  sql->callback([&] {
    auto m = stage_manifest(in, c, "sql-audit");
    m.stages.sql = true;
    code = run_and_print(m, c.out, {"sql"});
  });

  auto* attribute = app.add_subcommand("attribute", "SQL-anchored L0-L4 error attribution");
  add_inputs(attribute, in);
  add_common(attribute, c);
  bool no_sql = false, no_retrieval = false;
  attribute->add_flag("--no-sql", no_sql, "use gold answers as the oracle");
  attribute->add_flag("--no-retrieval", no_retrieval, "skip the context-miss rule");
  attribute->callback([&] {
    auto m = stage_manifest(in, c, "attribute");
    m.stages.attribution = true;
    m.stages.sql = !no_sql;
    m.stages.retrieval = !no_retrieval;
    code = run_and_print(m, c.out, {"attribution"});
  });

  auto* govern = app.add_subcommand("govern", "labeling-function governance and contrast sets");
  add_inputs(govern, in);
  add_common(govern, c);
  std::string lfs = std::string(GLEAN_DATA_DIR) + "/lfs.jsonl";
  govern->add_option("--lfs", lfs, "LF catalog JSONL");
  govern->callback([&] {
    auto m = stage_manifest(in, c, "govern");
    m.stages.governance = true;
    m.lfs = lfs;
    code = run_and_print(m, c.out, {"governance"});
  });

  auto* report = app.add_subcommand("report", "run every enabled stage of a manifest");
  std::string manifest_path;
  report->add_option("--manifest", manifest_path, "run manifest JSON")->required();
  report->add_option("--out", c.out, "output directory");
  report->callback([&] {
    auto m = glean::load_manifest(manifest_path);
    auto result = glean::run(m, c.out, glean::workers_from_env());
    std::cout << "report: " << (fs::path(c.out) / "report.json").string() << "\n"
              << "examples: " << result.report.at("counts").at("examples") << ", failed: " << result.failed_examples
              << "\n";
    code = result.exit_code;
  });

  auto* verify = app.add_subcommand("verify", "recompute report numbers from stage files");
  verify->add_option("--out", c.out, "run output directory")->required();
  verify->callback([&] {
    auto v = glean::verify(c.out);
    for (const auto& mm : v.mismatches) std::cout << "MISMATCH " << mm << "\n";
    std::cout << v.checked << " checks, " << v.mismatches.size() << " mismatches\n";
    code = v.ok() ? 0 : 1;
  });

  auto* serialize = app.add_subcommand("serialize", "serialize each example's table");
  add_inputs(serialize, in);
  std::string format = "markdown";
  serialize->add_option("--format", format, "markdown|csv|tsv|json|html|kv")
      ->check(CLI::IsMember({"markdown", "csv", "tsv", "json", "html", "kv"}));
  serialize->add_option("--out", c.out, "output JSONL file");
  serialize->callback([&] {
    auto b = glean::ingest(bundle_paths(in));
    auto f = glean::parse_format(format);
    std::vector<json> rows;
    for (const auto& ex : b.examples) {
      rows.push_back(json{{"id", ex.id}, {"format", format}, {"text", glean::emit(b.table_of(ex), f)}});
    }
    glean::io::write_jsonl(c.out, rows);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const glean::Error& e) {
    std::cerr << "glean: " << glean::to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "glean: " << e.what() << "\n";
    return 1;
  }
  return code;
}
