#include "glean/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "glean/attribution.hpp"
#include "glean/error.hpp"
#include "glean/governance.hpp"
#include "glean/io.hpp"
#include "glean/retrieval.hpp"
#include "glean/rng.hpp"
#include "glean/sql.hpp"

namespace glean {
namespace {

namespace fs = std::filesystem;
using io::json;

// ---------------------------------------------------------------- manifest

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("'" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

fs::path resolve(const fs::path& base, const json& v) {
  fs::path p = v.get<std::string>();
  return p.is_absolute() ? p : base / p;
}

std::map<std::string, fs::path> path_map(const fs::path& base, const json& j, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("'" + where + "' must map tags to paths");
  std::map<std::string, fs::path> out;
  for (const auto& [tag, v] : j.items()) {
    bool safe = !tag.empty() && std::all_of(tag.begin(), tag.end(), [](unsigned char c) {
      return std::isalnum(c) || c == '_' || c == '-' || c == '.';
    });
    if (!safe) throw std::invalid_argument("tag '" + tag + "' in " + where + " must match [A-Za-z0-9_.-]+");
    out[tag] = resolve(base, v);
  }
  return out;
}

bool known_retriever(const std::string& name) {
  static const std::set<std::string> kNames = {"tfidf", "bm25", "bm25f", "cell_bm25", "dense", "hybrid", "sql_gold"};
  return kNames.count(name) || (name.rfind("scores:", 0) == 0 && name.size() > 7);
}

// ---------------------------------------------------------------- per example

struct ExampleWork {
  EvidenceSet evidence;
  EvidenceSet answer_ev;
  EvidenceSet hybrid_ev;
  std::optional<EvidenceSet> sql_ev;
  bool has_sql = false;
  bool simple = false;

  bool sql_ran = false;
  OracleResult oracle;
  std::optional<MatchVerdict> verdict;
  bool target_em = false;

  std::vector<Ranking> rankings;
  std::map<std::string, std::map<std::size_t, int>> hits;
  std::optional<PrunedContext> pruned;
  std::optional<std::size_t> prune_hit_rank;

  std::vector<PerturbedExample> perturbed;
  std::vector<std::pair<ProbeKind, std::string>> skipped;
  std::optional<double> ngram;

  std::map<std::string, ExampleScore> scores;
  std::map<std::string, AttributionRecord> attribution;
  std::map<std::string, AttributionInput> attribution_inputs;

  std::vector<StageError> errors;
};

struct RunContext {
  const RunManifest& m;
  const DatasetBundle& b;
  std::vector<ParaphraseTemplate> templates;
  std::optional<NgramIndex> ngram_index;
};

std::vector<std::string> gold_of(const Example& ex) {
  return ex.task == Task::kQa ? ex.gold_answers : std::vector<std::string>{ex.label};
}

bool expected_probe_miss(ErrorCode c) {
  return c == ErrorCode::kNoSwapPossible || c == ErrorCode::kNoTemplateMatch || c == ErrorCode::kCanaryCollision;
}

template <typename Fn>
void guarded(ExampleWork& w, const std::string& id, const char* stage, Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    w.errors.push_back({id, stage, std::string(to_string(e.code())), e.what()});
  } catch (const std::exception& e) {
    w.errors.push_back({id, stage, "internal", e.what()});
  }
}

void evidence_step(const RunContext& ctx, const Example& ex, const Table& t, ExampleWork& w) {
  const auto& cfg = ctx.m.grounding;
  if (ex.task == Task::kQa) w.answer_ev = detect_answer_rows(t, ex.gold_answers, cfg);
  w.hybrid_ev = detect_hybrid(t, ex, cfg, ctx.m.hybrid_theta);
  if (ex.gold_sql) {
    w.has_sql = true;
    try {
      SqlQuery q = parse_sql(*ex.gold_sql);
      w.simple = classify_simple(q);
      if (w.simple) w.sql_ev = derive_sql_rows(t, q);
    } catch (const Error& e) {
      // Unparseable or unresolvable gold SQL simply yields no gold rows; the
      // execution bridge reports the failure.
      if (e.code() != ErrorCode::kSqlSyntax && e.code() != ErrorCode::kUnknownColumn) throw;
      w.simple = false;
    }
  }
  switch (ctx.m.evidence_mode) {
    case EvidenceMode::kAnswerString: w.evidence = w.answer_ev; break;
    case EvidenceMode::kHybrid: w.evidence = w.hybrid_ev; break;
    case EvidenceMode::kSql:
      w.evidence = w.sql_ev.value_or(EvidenceSet{});
      w.evidence.mode = EvidenceMode::kSql;
      break;
  }
}

void sql_step(const RunContext& ctx, const Example& ex, const Table& t, ExampleWork& w) {
  const GoldSqlEntry* entry = nullptr;
  if (auto it = ctx.b.gold_sql.find(ex.id); it != ctx.b.gold_sql.end()) entry = &it->second;
  if (!ex.gold_sql) return;
  SqlQuery q;
  try {
    q = parse_sql(*ex.gold_sql);
  } catch (const SqlSyntaxError&) {
    q = SqlQuery{};
    q.raw = *ex.gold_sql;
  }
  Database db = entry && entry->db_path ? Database::open_file(*entry->db_path)
                                        : Database::from_table(t, target_table_name(q));
  w.oracle = execute_gold(db, q);
  w.sql_ran = true;
  if (w.oracle.status == OracleStatus::kOk && ex.task == Task::kQa) {
    w.verdict = compare_denotation(w.oracle.denotation, ex.gold_answers, ctx.m.grounding);
    w.target_em = denotation_em(w.oracle.denotation, ex.gold_answers);
  }
}

std::optional<Ranking> ranking_for(const RunContext& ctx, const std::string& name, const Example& ex, const Table& t,
                                   const std::vector<RowDocument>& docs, const std::vector<std::string>& q,
                                   const ExampleWork& w) {
  auto dense = [&]() -> std::optional<Ranking> {
    auto it = ctx.b.embeddings.find(ex.id);
    if (it == ctx.b.embeddings.end()) return std::nullopt;
    if (it->second.row_vecs.size() != t.n_rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "embedding has " + std::to_string(it->second.row_vecs.size()) +
                                                     " row vectors for a " + std::to_string(t.n_rows()) +
                                                     "-row table");
    }
    return rank_dense(it->second);
  };
  std::optional<Ranking> r;
  if (name == "dense") {
    r = dense();
  } else if (name == "hybrid") {
    auto d = dense();
    if (d) r = fuse_hybrid(rank(q, docs, SparseKind::kBm25), *d);
  } else if (name == "sql_gold") {
    if (w.sql_ev) r = rank_sql_gold(w.sql_ev->rows, t.n_rows());
  } else if (name.rfind("scores:", 0) == 0) {
    auto tag = ctx.b.row_scores.find(name.substr(7));
    if (tag != ctx.b.row_scores.end()) {
      auto it = tag->second.find(ex.id);
      if (it != tag->second.end()) {
        if (it->second.size() != t.n_rows()) {
          throw Error(ErrorCode::kDimensionMismatch, "row-score list length differs from the table's row count");
        }
        r = ranking_from_scores(name, it->second);
      }
    }
  } else {
    r = rank(q, docs, parse_sparse_kind(name));
  }
  if (r) r->retriever = name;
  return r;
}

void retrieval_step(const RunContext& ctx, const Example& ex, const Table& t, ExampleWork& w) {
  if (t.n_rows() == 0) return;
  const auto docs = build_row_docs(t);
  const auto q = content_tokens(ex.question);
  std::vector<std::string> names = ctx.m.retrievers;
  if (std::find(names.begin(), names.end(), ctx.m.prune_retriever) == names.end()) {
    names.push_back(ctx.m.prune_retriever);
  }
  for (const auto& name : names) {
    auto r = ranking_for(ctx, name, ex, t, docs, q, w);
    if (!r) continue;
    const bool listed = std::find(ctx.m.retrievers.begin(), ctx.m.retrievers.end(), name) != ctx.m.retrievers.end();
    if (listed && w.evidence.covered()) w.hits[name] = recall_at_k(*r, w.evidence.rows, ctx.m.ks);
    if (name == ctx.m.prune_retriever) {
      w.pruned = budget_prune(t, *r, q, ctx.m.budget);
      if (w.evidence.covered()) w.prune_hit_rank = first_hit_rank(*r, w.evidence.rows);
    }
    if (listed) w.rankings.push_back(std::move(*r));
  }
}

void probe_step(const RunContext& ctx, const Example& ex, const Table& t, ExampleWork& w) {
  ProbeContext pctx;
  pctx.global_seed = ctx.m.global_seed;
  pctx.templates = ctx.templates.empty() ? nullptr : &ctx.templates;
  for (auto kind : ctx.m.probes) {
    if (kind == ProbeKind::kNgramOverlap) {
      if (ctx.ngram_index) w.ngram = ngram_overlap(ex.question, *ctx.ngram_index);
      continue;
    }
    if (kind == ProbeKind::kParaphrase && !pctx.templates) {
      w.skipped.emplace_back(kind, "no template catalog");
      continue;
    }
    try {
      w.perturbed.push_back(apply_probe(kind, ex, t, pctx));
    } catch (const Error& e) {
      if (!expected_probe_miss(e.code())) throw;
      w.skipped.emplace_back(kind, std::string(to_string(e.code())));
    }
  }
}

void model_step(const RunContext& ctx, const Example& ex, const Table& t, ExampleWork& w) {
  for (const auto& [model, preds] : ctx.b.predictions) {
    auto it = preds.find(ex.id);
    if (it == preds.end()) continue;
    const std::string& pred = it->second;
    if (ctx.m.stages.metrics) {
      auto gold = gold_of(ex);
      w.scores[model] = ExampleScore{ex.id, em(pred, gold), token_f1(pred, gold)};
    }
    if (!ctx.m.stages.attribution || ex.task != Task::kQa) continue;
    guarded(w, ex.id, "attribution", [&] {
      AttributionInput in;
      in.example_id = ex.id;
      in.prediction = pred;
      in.oracle = ex.gold_answers;
      if (w.sql_ran) {
        if (w.oracle.status == OracleStatus::kExecError) {
          in.sql_status = SqlStatus::kExecError;
          in.oracle_source = OracleSource::kSql;
        } else {
          in.sql_status = SqlStatus::kOk;
          bool nonempty = std::any_of(w.oracle.denotation.begin(), w.oracle.denotation.end(),
                                      [](const std::string& s) { return !trim(s).empty(); });
          if (nonempty) {
            in.oracle = w.oracle.denotation;
            in.oracle_source = OracleSource::kSql;
          }
        }
      }
      if (w.pruned) {
        in.retrieval = RetrievalInfo{w.evidence, std::set<std::size_t>(w.pruned->rows.begin(), w.pruned->rows.end())};
      }
      w.attribution[model] = attribute(in, t, ctx.m.grounding, GroundingConfig::exact());
      w.attribution_inputs[model] = std::move(in);
    });
  }
}

ExampleWork process(const RunContext& ctx, const Example& ex) {
  ExampleWork w;
  const Table& t = ctx.b.table_of(ex);
  guarded(w, ex.id, "evidence", [&] { evidence_step(ctx, ex, t, w); });
  if (ctx.m.stages.probes) guarded(w, ex.id, "probes", [&] { probe_step(ctx, ex, t, w); });
  if (ctx.m.stages.retrieval) guarded(w, ex.id, "retrieval", [&] { retrieval_step(ctx, ex, t, w); });
  if (ctx.m.stages.sql) guarded(w, ex.id, "sql", [&] { sql_step(ctx, ex, t, w); });
  model_step(ctx, ex, t, w);
  return w;
}

// ---------------------------------------------------------------- reductions

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

json block_json(const MetricBlock& b) {
  return json{{"em", b.em}, {"f1", b.f1}, {"n", b.n}, {"ci_em", interval_json(b.ci_em)}, {"ci_f1", interval_json(b.ci_f1)}};
}

json shares_json(const LabelShares& s) {
  json j = json::object();
  for (const auto& [label, share] : s) j[std::string(to_string(label))] = share;
  return j;
}

json classifier_json(const ClassifierMetrics& c) {
  return json{{"accuracy", c.accuracy}, {"auroc", c.auroc}, {"auprc", c.auprc}, {"pos_rate", c.pos_rate}, {"n", c.n}};
}

json stratum_json(const Stratum& s) { return json{{"n", s.n}, {"em", opt_json(s.em)}, {"f1", opt_json(s.f1)}}; }

/// Mean hit@k over the rows of a recall table, summed in row order.
double mean_hits(const std::vector<int>& hits) {
  double total = 0.0;
  for (int h : hits) total += h;
  return hits.empty() ? 0.0 : total / static_cast<double>(hits.size());
}

std::string jsonl(const std::vector<json>& rows) {
  std::string text;
  for (const auto& r : rows) {
    text += io::dump(r);
    text += '\n';
  }
  return text;
}

json accounting_json(const AccountingReport& a) {
  json shares = json::object();
  json counts = json::object();
  for (auto c : {MismatchCategory::kNormalizationFormat, MismatchCategory::kOther, MismatchCategory::kMultiValue,
                 MismatchCategory::kEmptySql}) {
    const std::string name(to_string(c));
    shares[name] = opt_json(a.category_share(c));
    auto it = a.categories.find(c);
    counts[name] = it == a.categories.end() ? 0 : it->second;
  }
  json table = {
      {"Total", a.total},
      {"SQL executable", a.executable},
      {"Execution rate", a.execution_rate()},
      {"SQL-target EM", a.executable ? json(a.sql_target_em()) : json(nullptr)},
      {"Exact match (sql-ok)", a.executable ? json(a.exact_rate()) : json(nullptr)},
      {"Soft match (sql-ok)", a.executable ? json(a.soft_rate()) : json(nullptr)},
      {"Mismatches", a.mismatches},
      {"Soft-match resolved (of mismatches)", opt_json(a.soft_resolved_rate())},
  };
  return json{{"total", a.total},
              {"executable", a.executable},
              {"exact", a.exact},
              {"soft", a.soft},
              {"target_em", a.target_em},
              {"mismatches", a.mismatches},
              {"soft_resolved", a.soft_resolved},
              {"category_counts", counts},
              {"category_shares", shares},
              {"table", table}};
}

std::vector<SqlOutcome> outcomes_from_rows(const std::vector<json>& rows) {
  std::vector<SqlOutcome> out;
  for (const auto& r : rows) {
    if (!r.at("compared").get<bool>()) continue;
    SqlOutcome o;
    o.id = r.at("id").get<std::string>();
    o.status = r.at("status").get<std::string>() == "ok" ? OracleStatus::kOk : OracleStatus::kExecError;
    if (o.status == OracleStatus::kOk) {
      o.verdict.exact = r.at("exact").get<bool>();
      o.verdict.soft = r.at("soft").get<bool>();
      const std::string cat = r.at("category").get<std::string>();
      for (auto c : {MismatchCategory::kExact, MismatchCategory::kNormalizationFormat, MismatchCategory::kMultiValue,
                     MismatchCategory::kEmptySql, MismatchCategory::kOther}) {
        if (to_string(c) == cat) o.verdict.category = c;
      }
      o.target_em = r.at("target_em").get<bool>();
    }
    out.push_back(std::move(o));
  }
  return out;
}

LabelMatrix matrix_from_rows(const std::vector<json>& rows, const std::vector<std::string>& lf_names) {
  LabelMatrix m;
  m.lf_names = lf_names;
  for (const auto& r : rows) {
    m.ids.push_back(r.at("id").get<std::string>());
    std::vector<std::optional<std::string>> votes;
    for (const auto& name : lf_names) {
      const json& v = r.at("votes").at(name);
      votes.push_back(v.is_null() ? std::nullopt : std::optional<std::string>(v.get<std::string>()));
    }
    m.votes.push_back(std::move(votes));
  }
  return m;
}

std::map<std::string, std::string> gold_labels_from_rows(const std::vector<json>& rows) {
  std::map<std::string, std::string> gold;
  for (const auto& r : rows) {
    if (!r.at("gold").is_null()) gold[r.at("id").get<std::string>()] = r.at("gold").get<std::string>();
  }
  return gold;
}

std::string fmt(const json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
    return buf;
  }
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string summary_markdown(const json& r) {
  std::ostringstream md;
  const json& run = r.at("run");
  md << "# Run " << run.at("run_id").get<std::string>() << "\n\n";
  md << "- dataset: " << run.at("dataset").get<std::string>() << "\n";
  md << "- seed: " << run.at("global_seed").get<std::uint64_t>() << "\n";
  md << "- examples: " << r.at("counts").at("examples").get<std::size_t>()
     << ", failed: " << r.at("counts").at("failed_examples").get<std::size_t>() << "\n\n";
  if (r.contains("metrics")) {
    md << "## QA metrics\n\n| model | n | EM | F1 |\n| --- | --- | --- | --- |\n";
    for (const auto& [model, b] : r.at("metrics").at("models").items()) {
      md << "| " << model << " | " << b.at("n").get<std::size_t>() << " | " << fmt(b.at("em")) << " ("
         << fmt(b.at("ci_em")[0]) << "-" << fmt(b.at("ci_em")[1]) << ") | " << fmt(b.at("f1")) << " ("
         << fmt(b.at("ci_f1")[0]) << "-" << fmt(b.at("ci_f1")[1]) << ") |\n";
    }
    md << "\n";
  }
  if (r.contains("retrieval")) {
    const json& ret = r.at("retrieval");
    md << "## Retrieval\n\nEvidence coverage: " << fmt(ret.at("coverage")) << "\n\n| retriever |";
    std::vector<std::string> ks;
    for (const auto& k : ret.at("ks")) ks.push_back(std::to_string(k.get<std::size_t>()));
    for (const auto& k : ks) md << " R@" << k << " |";
    md << "\n| --- |";
    for (std::size_t i = 0; i < ks.size(); ++i) md << " --- |";
    md << "\n";
    for (const auto& [name, rec] : ret.at("recall").items()) {
      md << "| " << name << " |";
      for (const auto& k : ks) md << " " << fmt(rec.at(k)) << " |";
      md << "\n";
    }
    md << "\n";
  }
  if (r.contains("sql")) {
    md << "## SQL oracle accounting\n\n| field | value |\n| --- | --- |\n";
    for (const auto& [k, v] : r.at("sql").at("accounting").at("table").items()) md << "| " << k << " | " << fmt(v) << " |\n";
    md << "\n";
  }
  if (r.contains("attribution")) {
    md << "## Attribution\n\n| model | OK | L0 | L0_5 | L1 | L2 | L3 | L4 |\n| --- | --- | --- | --- | --- | --- | --- | --- |\n";
    for (const auto& [model, a] : r.at("attribution").items()) {
      md << "| " << model << " |";
      for (auto l : kAllLabels) md << " " << fmt(a.at("all").at(std::string(to_string(l)))) << " |";
      md << "\n";
    }
    md << "\nRule 8 (prediction in table, gold not) is binned as L4.\n\n";
  }
  if (r.contains("governance")) {
    const json& g = r.at("governance");
    md << "## Governance\n\n| coverage | conflict | abstention | LF accuracy |\n| --- | --- | --- | --- |\n| "
       << fmt(g.at("coverage")) << " | " << fmt(g.at("conflict_rate")) << " | " << fmt(g.at("abstention_rate"))
       << " | " << fmt(g.at("lf_accuracy")) << " |\n\n";
    if (g.at("diagnostic_only").get<bool>()) md << "Coverage is below 0.25: treat this report as diagnostic only.\n\n";
  }
  return md.str();
}

ExampleScore score_from_row(const json& r) {
  return ExampleScore{r.at("id").get<std::string>(), r.at("em").get<double>(), r.at("f1").get<double>()};
}

}  // namespace

// ---------------------------------------------------------------- public

json to_json(const GroundingConfig& cfg) {
  return json{{"casefold", cfg.casefold},
              {"strip_punct", cfg.strip_punct},
              {"strip_articles", cfg.strip_articles},
              {"substring_text_match", cfg.substring_text_match},
              {"numeric_abs_tol", cfg.numeric_abs_tol},
              {"numeric_rel_tol", cfg.numeric_rel_tol},
              {"multivalue_policy", std::string(to_string(cfg.multivalue_policy))}};
}

GroundingConfig grounding_from_json(const json& j) {
  check_keys(j,
             {"casefold", "strip_punct", "strip_articles", "substring_text_match", "numeric_abs_tol",
              "numeric_rel_tol", "multivalue_policy"},
             "grounding");
  GroundingConfig cfg;
  cfg.casefold = j.value("casefold", cfg.casefold);
  cfg.strip_punct = j.value("strip_punct", cfg.strip_punct);
  cfg.strip_articles = j.value("strip_articles", cfg.strip_articles);
  cfg.substring_text_match = j.value("substring_text_match", cfg.substring_text_match);
  cfg.numeric_abs_tol = j.value("numeric_abs_tol", cfg.numeric_abs_tol);
  cfg.numeric_rel_tol = j.value("numeric_rel_tol", cfg.numeric_rel_tol);
  if (j.contains("multivalue_policy")) {
    cfg.multivalue_policy = parse_multivalue_policy(j.at("multivalue_policy").get<std::string>());
  }
  cfg.validate();
  return cfg;
}

void RunManifest::validate() const {
  grounding.validate();
  budget.validate();
  auto bad = [](const std::string& why) { throw Error(ErrorCode::kInvalidArgument, "manifest: " + why); };
  if (ks.empty() || std::any_of(ks.begin(), ks.end(), [](std::size_t k) { return k == 0; })) bad("ks must be positive");
  for (const auto& r : retrievers) {
    if (!known_retriever(r)) bad("unknown retriever '" + r + "'");
  }
  if (!known_retriever(prune_retriever)) bad("unknown prune retriever '" + prune_retriever + "'");
  if (!(hybrid_theta >= 0.0 && hybrid_theta <= 1.0)) bad("hybrid_theta must lie in [0, 1]");
  if (!(artifact_holdout > 0.0 && artifact_holdout < 1.0)) bad("artifact holdout must lie in (0, 1)");
  if (!(fail_soft_threshold >= 0.0 && fail_soft_threshold <= 1.0)) bad("fail_soft_threshold must lie in [0, 1]");
  if (bootstrap_resamples == 0 || ngram_n == 0 || artifact_epochs == 0) bad("counts must be positive");
}

namespace {

RunManifest parse_manifest(const json& j, const fs::path& base_dir) {
  RunManifest m;
  m.source = j;
  check_keys(j,
             {"run_id", "global_seed", "dataset", "inputs", "stages", "grounding", "budget", "retrievers",
              "prune_retriever", "ks", "probes", "evidence_mode", "hybrid_theta", "bootstrap_resamples", "ngram_n",
              "artifact", "budgeted_predictions", "fail_soft_threshold"},
             "manifest");
  m.run_id = j.value("run_id", m.run_id);
  m.global_seed = j.value("global_seed", m.global_seed);
  m.dataset = j.value("dataset", m.dataset);

  const json& in = io::require(j, "inputs");
  check_keys(in,
             {"tables", "examples", "predictions", "gold_sql", "embeddings", "classifier_scores", "row_scores",
              "judgments", "lfs", "templates", "contamination_corpus"},
             "inputs");
  m.inputs.tables = resolve(base_dir, io::require(in, "tables"));
  m.inputs.examples = resolve(base_dir, io::require(in, "examples"));
  if (in.contains("predictions")) m.inputs.predictions = path_map(base_dir, in.at("predictions"), "predictions");
  if (in.contains("classifier_scores")) {
    m.inputs.classifier_scores = path_map(base_dir, in.at("classifier_scores"), "classifier_scores");
  }
  if (in.contains("row_scores")) m.inputs.row_scores = path_map(base_dir, in.at("row_scores"), "row_scores");
  if (in.contains("gold_sql")) m.inputs.gold_sql = resolve(base_dir, in.at("gold_sql"));
  if (in.contains("embeddings")) m.inputs.embeddings = resolve(base_dir, in.at("embeddings"));
  if (in.contains("judgments")) m.inputs.judgments = resolve(base_dir, in.at("judgments"));
  if (in.contains("lfs")) m.lfs = resolve(base_dir, in.at("lfs"));
  if (in.contains("templates")) m.templates = resolve(base_dir, in.at("templates"));
  if (in.contains("contamination_corpus")) m.contamination_corpus = resolve(base_dir, in.at("contamination_corpus"));

  if (j.contains("stages")) {
    const json& s = j.at("stages");
    check_keys(s, {"probes", "retrieval", "metrics", "evidence", "sql", "attribution", "governance"}, "stages");
    m.stages.probes = s.value("probes", true);
    m.stages.retrieval = s.value("retrieval", true);
    m.stages.metrics = s.value("metrics", true);
    m.stages.evidence = s.value("evidence", true);
    m.stages.sql = s.value("sql", true);
    m.stages.attribution = s.value("attribution", true);
    m.stages.governance = s.value("governance", true);
  }
  if (j.contains("grounding")) m.grounding = grounding_from_json(j.at("grounding"));
  if (j.contains("budget")) {
    const json& b = j.at("budget");
    check_keys(b, {"max_table_tokens", "max_cols"}, "budget");
    m.budget.max_table_tokens = b.value("max_table_tokens", m.budget.max_table_tokens);
    m.budget.max_cols = b.value("max_cols", m.budget.max_cols);
  }
  if (j.contains("retrievers")) m.retrievers = j.at("retrievers").get<std::vector<std::string>>();
  m.prune_retriever = j.value("prune_retriever", m.prune_retriever);
  if (j.contains("ks")) m.ks = j.at("ks").get<std::vector<std::size_t>>();
  if (j.contains("probes")) {
    m.probes.clear();
    for (const auto& p : j.at("probes")) m.probes.push_back(parse_probe_kind(p.get<std::string>()));
  }
  if (j.contains("evidence_mode")) m.evidence_mode = parse_evidence_mode(j.at("evidence_mode").get<std::string>());
  m.hybrid_theta = j.value("hybrid_theta", m.hybrid_theta);
  m.bootstrap_resamples = j.value("bootstrap_resamples", m.bootstrap_resamples);
  m.ngram_n = j.value("ngram_n", m.ngram_n);
  if (j.contains("artifact")) {
    const json& a = j.at("artifact");
    check_keys(a, {"holdout", "epochs", "lr"}, "artifact");
    m.artifact_holdout = a.value("holdout", m.artifact_holdout);
    m.artifact_epochs = a.value("epochs", m.artifact_epochs);
    m.artifact_lr = a.value("lr", m.artifact_lr);
  }
  if (j.contains("budgeted_predictions")) {
    m.budgeted_predictions = j.at("budgeted_predictions").get<std::map<std::string, std::string>>();
  }
  m.fail_soft_threshold = j.value("fail_soft_threshold", m.fail_soft_threshold);
  m.validate();
  return m;
}

}  // namespace

RunManifest manifest_from_json(const json& j, const fs::path& base_dir) {
  try {
    return parse_manifest(j, base_dir);
  } catch (const SchemaError&) {
    throw;
  } catch (const json::exception& e) {
    throw SchemaError("manifest", 1, e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError("manifest", 1, e.what());
  } catch (const Error& e) {
    throw SchemaError("manifest", 1, e.what());
  }
}

RunManifest load_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string(), 1, e.what());
  }
  try {
    return manifest_from_json(j, fs::absolute(path).parent_path());
  } catch (const SchemaError& e) {
    std::string why = e.what();
    const std::string prefix = "SchemaError: manifest:1: ";
    if (why.rfind(prefix, 0) == 0) why.erase(0, prefix.size());
    throw SchemaError(path.string(), 1, why);
  }
}

std::size_t workers_from_env() {
  if (const char* v = std::getenv("GLEAN_WORKERS")) {
    char* end = nullptr;
    unsigned long n = std::strtoul(v, &end, 10);
    if (end != v && *end == '\0' && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

ArtifactResult artifact_detector(const std::vector<Example>& examples, const TableIndex& tables, std::uint64_t seed,
                                 double holdout, unsigned groups, std::size_t epochs, double lr) {
  std::vector<std::vector<double>> x_train, x_test;
  std::vector<int> y_train, y_test;
  for (const auto& ex : examples) {
    if (ex.task != Task::kVerdict) continue;
    auto f = feature_vector(extract_features(ex, tables.at(ex.table_id)), groups);
    int y = ex.label == "entailed" ? 1 : 0;
    Rng rng(derive_seed(seed, "holdout:" + ex.id));
    if (rng.uniform01() < holdout) {
      x_test.push_back(std::move(f));
      y_test.push_back(y);
    } else {
      x_train.push_back(std::move(f));
      y_train.push_back(y);
    }
  }
  if (x_train.empty() || x_test.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "artifact detector needs verdict examples in both splits");
  }
  ArtifactResult out;
  out.n_train = x_train.size();
  out.n_test = x_test.size();
  out.model = train_linear(x_train, y_train, lr, epochs, derive_seed(seed, "artifact-init"), feature_names(groups));
  out.held_out = classifier_metrics(predict(out.model, x_test), y_test);
  return out;
}

RunResult run(const RunManifest& m, const DatasetBundle& b, const fs::path& out_dir, std::size_t workers) {
  m.validate();
  RunContext ctx{m, b, {}, std::nullopt};
  const bool want_ngram = std::find(m.probes.begin(), m.probes.end(), ProbeKind::kNgramOverlap) != m.probes.end();
  if (m.stages.probes && m.templates) ctx.templates = load_templates(*m.templates);
  if (m.stages.probes && want_ngram && m.contamination_corpus) {
    NgramIndex index(m.ngram_n);
    io::for_each_jsonl(*m.contamination_corpus,
                       [&](const json& j, std::size_t) { index.add(io::require_string(j, "text")); });
    ctx.ngram_index = std::move(index);
  }
  std::vector<LabelingFunction> lfs;
  if (m.stages.governance && m.lfs) lfs = load_lfs(*m.lfs);

  const auto& exs = b.examples;
  std::vector<ExampleWork> work(exs.size());
  parallel_for(exs.size(), workers, [&](std::size_t i) { work[i] = process(ctx, exs[i]); });

  RunResult result;
  std::map<std::string, std::string> files;  // path relative to out_dir -> contents
  json report;

  // run metadata
  json digests = json::object();
  auto digest = [&](const std::string& name, const fs::path& p) {
    if (!p.empty()) digests[name] = io::file_sha256(p);
  };
  digest("tables", m.inputs.tables);
  digest("examples", m.inputs.examples);
  for (const auto& [tag, p] : m.inputs.predictions) digest("predictions." + tag, p);
  for (const auto& [tag, p] : m.inputs.classifier_scores) digest("classifier_scores." + tag, p);
  for (const auto& [tag, p] : m.inputs.row_scores) digest("row_scores." + tag, p);
  if (m.inputs.gold_sql) digest("gold_sql", *m.inputs.gold_sql);
  if (m.inputs.embeddings) digest("embeddings", *m.inputs.embeddings);
  if (m.inputs.judgments) digest("judgments", *m.inputs.judgments);
  if (m.lfs) digest("lfs", *m.lfs);
  if (m.templates) digest("templates", *m.templates);
  if (m.contamination_corpus) digest("contamination_corpus", *m.contamination_corpus);
  report["run"] = {{"run_id", m.run_id},
                   {"dataset", m.dataset},
                   {"global_seed", m.global_seed},
                   {"tool_version", kToolVersion},
                   {"manifest", m.source},
                   {"grounding", to_json(m.grounding)},
                   {"input_sha256", digests},
                   {"flags",
                    {{"simple_sql_permits_order_by_limit", true},
                     {"rule8_pred_grounded_gold_not_binned_as", "L4"},
                     {"attribution_oracle_match", "exact"},
                     {"bm25", {{"k1", 1.2}, {"b", 0.75}}},
                     {"bm25f_weights", {{"header", 0.5}, {"cell", 1.0}}},
                     {"rrf_k", 60}}}};

  // errors
  std::vector<json> error_rows;
  for (std::size_t i = 0; i < exs.size(); ++i) {
    if (!work[i].errors.empty()) ++result.failed_examples;
    for (const auto& e : work[i].errors) {
      result.errors.push_back(e);
      error_rows.push_back(json{{"id", e.id}, {"stage", e.stage}, {"code", e.code}, {"message", e.message}});
    }
  }
  files["stages/errors.jsonl"] = jsonl(error_rows);
  std::size_t n_qa = 0;
  for (const auto& ex : exs) n_qa += ex.task == Task::kQa;
  const double failure_rate =
      exs.empty() ? 0.0 : static_cast<double>(result.failed_examples) / static_cast<double>(exs.size());
  report["counts"] = {{"examples", exs.size()},
                      {"qa", n_qa},
                      {"verdict", exs.size() - n_qa},
                      {"tables", b.tables.size()},
                      {"failed_examples", result.failed_examples},
                      {"failure_rate", failure_rate},
                      {"errors", result.errors.size()}};

  // probes
  if (m.stages.probes) {
    std::vector<json> rows, table_rows, ngram_rows;
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    for (auto kind : m.probes) {
      if (kind == ProbeKind::kNgramOverlap) continue;
      counts[std::string(to_string(kind))] = {{"generated", 0}, {"skipped", 0}};
    }
    std::vector<double> overlaps;
    for (std::size_t i = 0; i < exs.size(); ++i) {
      for (const auto& pe : work[i].perturbed) {
        ++counts[std::string(to_string(pe.probe))]["generated"];
        rows.push_back(json{{"id", pe.example.id},
                            {"source_id", pe.source_id},
                            {"probe", std::string(to_string(pe.probe))},
                            {"question", pe.example.question},
                            {"table_id", pe.example.table_id},
                            {"claim", std::string(to_string(pe.claim))}});
        if (pe.table) table_rows.push_back(io::to_json(*pe.table));
      }
      for (const auto& [kind, _] : work[i].skipped) ++counts[std::string(to_string(kind))]["skipped"];
      if (work[i].ngram) {
        overlaps.push_back(*work[i].ngram);
        ngram_rows.push_back(json{{"id", exs[i].id}, {"overlap", *work[i].ngram}});
      }
    }
    files["stages/probes.jsonl"] = jsonl(rows);
    files["stages/probe_tables.jsonl"] = jsonl(table_rows);
    json probes = {{"counts", counts}};
    if (ctx.ngram_index) {
      files["stages/ngram.jsonl"] = jsonl(ngram_rows);
      std::size_t flagged = std::count_if(overlaps.begin(), overlaps.end(), [](double v) { return v > 0.0; });
      probes["ngram_overlap"] = {{"n", m.ngram_n},
                                 {"examples", overlaps.size()},
                                 {"mean", overlaps.empty() ? 0.0 : std::accumulate(overlaps.begin(), overlaps.end(), 0.0) / static_cast<double>(overlaps.size())},
                                 {"max", overlaps.empty() ? 0.0 : *std::max_element(overlaps.begin(), overlaps.end())},
                                 {"flagged", flagged}};
    }
    ProbeContext pctx;
    pctx.global_seed = m.global_seed;
    if (std::find(m.probes.begin(), m.probes.end(), ProbeKind::kCanary) != m.probes.end()) {
      json hits = json::object();
      for (const auto& [model, preds] : b.predictions) {
        std::vector<std::string> flagged;
        for (const auto& [id, text] : preds) {
          std::string source = derived_source(id).value_or(id);
          if (text.find(canary_for(pctx, source)) != std::string::npos) flagged.push_back(id);
        }
        hits[model] = flagged;
      }
      probes["canary_hits"] = hits;
    }
    json deltas = json::object();
    for (const auto& [model, preds] : b.predictions) {
      std::map<std::string, std::pair<std::vector<ExampleScore>, std::vector<ExampleScore>>> by_kind;
      for (std::size_t i = 0; i < exs.size(); ++i) {
        auto src = preds.find(exs[i].id);
        if (src == preds.end()) continue;
        for (const auto& pe : work[i].perturbed) {
          auto p = preds.find(pe.example.id);
          if (p == preds.end()) continue;
          auto gold = gold_of(exs[i]);
          auto pgold = gold_of(pe.example);
          auto& [before, after] = by_kind[std::string(to_string(pe.probe))];
          before.push_back({exs[i].id, em(src->second, gold), token_f1(src->second, gold)});
          after.push_back({exs[i].id, em(p->second, pgold), token_f1(p->second, pgold)});
        }
      }
      json per_kind = json::object();
      for (const auto& [kind, pair] : by_kind) {
        const std::uint64_t seed = derive_seed(m.global_seed, "probe:" + model + ":" + kind);
        auto before = aggregate_scores(pair.first, seed, m.bootstrap_resamples);
        auto after = aggregate_scores(pair.second, seed, m.bootstrap_resamples);
        json d = {{"n", before.n}};
        for (const auto& [metric, md] : probe_delta(before, after)) {
          d[metric] = {{"before", md.before}, {"after", md.after}, {"delta", md.delta}};
        }
        per_kind[kind] = d;
      }
      if (!per_kind.empty()) deltas[model] = per_kind;
    }
    probes["deltas"] = deltas;
    report["probes"] = probes;
  }

  // retrieval
  if (m.stages.retrieval) {
    std::vector<json> rank_rows, recall_rows, request_rows;
    std::map<std::string, std::map<std::size_t, std::vector<int>>> hits;
    std::size_t qa_with_rows = 0, covered = 0, contexts = 0, oversize = 0;
    double rows_total = 0.0, tokens_total = 0.0;
    for (std::size_t i = 0; i < exs.size(); ++i) {
      const auto& w = work[i];
      for (const auto& r : w.rankings) {
        rank_rows.push_back(json{{"id", exs[i].id}, {"retriever", r.retriever}, {"order", r.order}, {"scores", r.scores}});
      }
      if (exs[i].task == Task::kQa && b.table_of(exs[i]).n_rows() > 0) {
        ++qa_with_rows;
        if (w.evidence.covered()) ++covered;
        for (const auto& [name, h] : w.hits) {
          json hj = json::object();
          for (const auto& [k, v] : h) {
            hits[name][k].push_back(v);
            hj[std::to_string(k)] = v;
          }
          recall_rows.push_back(json{{"id", exs[i].id}, {"retriever", name}, {"hits", hj}});
        }
      }
      if (w.pruned) {
        ++contexts;
        oversize += w.pruned->oversize;
        rows_total += static_cast<double>(w.pruned->rows.size());
        tokens_total += static_cast<double>(w.pruned->row_tokens);
        request_rows.push_back(json{{"id", exs[i].id},
                                    {"question", exs[i].question},
                                    {"context", w.pruned->context},
                                    {"format", "markdown"},
                                    {"retriever", m.prune_retriever},
                                    {"budget", m.budget.max_table_tokens},
                                    {"rows", w.pruned->rows},
                                    {"cols", w.pruned->cols},
                                    {"row_tokens", w.pruned->row_tokens},
                                    {"oversize", w.pruned->oversize}});
      }
    }
    files["stages/rankings.jsonl"] = jsonl(rank_rows);
    files["stages/recall.jsonl"] = jsonl(recall_rows);
    files["stages/requests.jsonl"] = jsonl(request_rows);
    json recall = json::object();
    for (const auto& [name, by_k] : hits) {
      json rj = json::object();
      for (const auto& [k, v] : by_k) rj[std::to_string(k)] = mean_hits(v);
      rj["n"] = by_k.begin()->second.size();
      recall[name] = rj;
    }
    json strata = json::object();
    for (const auto& [model, _] : b.predictions) {
      std::vector<HitRecord> recs;
      for (std::size_t i = 0; i < exs.size(); ++i) {
        auto s = work[i].scores.find(model);
        if (exs[i].task != Task::kQa || !work[i].evidence.covered() || !work[i].pruned || s == work[i].scores.end()) {
          continue;
        }
        recs.push_back(HitRecord{work[i].prune_hit_rank, s->second.em, s->second.f1});
      }
      if (recs.empty()) continue;
      auto rep = hit_rank_stratify(recs);
      json buckets = json::object();
      for (const auto& [name, st] : rep.buckets) buckets[name] = stratum_json(st);
      strata[model] = {{"hit_at_1", stratum_json(rep.hit_at_1)}, {"miss_at_1", stratum_json(rep.miss_at_1)},
                       {"buckets", buckets}};
    }
    report["retrieval"] = {
        {"evidence_mode", std::string(to_string(m.evidence_mode))},
        {"ks", m.ks},
        {"evaluated", qa_with_rows},
        {"covered", covered},
        {"coverage", qa_with_rows ? json(static_cast<double>(covered) / static_cast<double>(qa_with_rows)) : json(nullptr)},
        {"recall", recall},
        {"budget", {{"max_table_tokens", m.budget.max_table_tokens}, {"max_cols", m.budget.max_cols}}},
        {"prune_retriever", m.prune_retriever},
        {"pruning",
         {{"contexts", contexts},
          {"oversize", oversize},
          {"mean_rows", contexts ? rows_total / static_cast<double>(contexts) : 0.0},
          {"mean_row_tokens", contexts ? tokens_total / static_cast<double>(contexts) : 0.0}}},
        {"hit_rank_strata", strata},
        {"budgeted_predictions", m.budgeted_predictions}};
  }

  // metrics
  if (m.stages.metrics) {
    json models = json::object();
    for (const auto& [model, _] : b.predictions) {
      std::vector<ExampleScore> scores;
      std::vector<json> rows;
      for (std::size_t i = 0; i < exs.size(); ++i) {
        auto s = work[i].scores.find(model);
        if (s == work[i].scores.end()) continue;
        scores.push_back(s->second);
        rows.push_back(json{{"id", s->second.id}, {"em", s->second.em}, {"f1", s->second.f1}});
      }
      files["stages/scores." + model + ".jsonl"] = jsonl(rows);
      auto block = aggregate_scores(scores, derive_seed(m.global_seed, "metrics:" + model), m.bootstrap_resamples);
      json bj = block_json(block);
      bj["missing"] = exs.size() - block.n;
      models[model] = bj;
    }
    json metrics = {{"models", models}};

    std::size_t n_verdict = exs.size() - n_qa;
    if (n_verdict > 0) {
      json art = json::object();
      const std::vector<std::pair<std::string, unsigned>> variants = {
          {"all", kAllFeatures},
          {"no_overlap", kSizeFeatures | kBiasFeatures},
          {"no_size", kOverlapFeatures | kBiasFeatures},
          {"no_bias", kOverlapFeatures | kSizeFeatures}};
      for (const auto& [name, groups] : variants) {
        try {
          auto r = artifact_detector(exs, b.tables, m.global_seed, m.artifact_holdout, groups, m.artifact_epochs,
                                     m.artifact_lr);
          art[name] = {{"slots", r.model.slots.size()},
                       {"n_train", r.n_train},
                       {"n_test", r.n_test},
                       {"held_out", classifier_json(r.held_out)}};
        } catch (const Error& e) {
          art[name] = {{"error", std::string(to_string(e.code())) + ": " + e.what()}};
        }
      }
      metrics["artifact_detector"] = art;
    }
    json cls = json::object();
    for (const auto& [tag, scores] : b.classifier_scores) {
      std::vector<double> s;
      std::vector<int> y;
      for (const auto& [id, v] : scores) {
        const Example* ex = b.find(id);
        if (!ex || ex->task != Task::kVerdict) continue;
        s.push_back(v);
        y.push_back(ex->label == "entailed" ? 1 : 0);
      }
      try {
        cls[tag] = classifier_json(classifier_metrics(s, y));
      } catch (const Error& e) {
        cls[tag] = {{"error", std::string(to_string(e.code())) + ": " + e.what()}};
      }
    }
    metrics["classifiers"] = cls;
    report["metrics"] = metrics;
  }

  // evidence
  if (m.stages.evidence) {
    std::vector<json> rows;
    std::vector<EvidenceSet> sets;
    std::vector<IdEvidence> gold, answer, hybrid;
    std::size_t with_sql = 0, simple = 0;
    for (std::size_t i = 0; i < exs.size(); ++i) {
      const auto& w = work[i];
      if (w.has_sql) {
        ++with_sql;
        simple += w.simple;
      }
      if (exs[i].task != Task::kQa) continue;
      sets.push_back(w.evidence);
      rows.push_back(json{{"id", exs[i].id},
                          {"mode", std::string(to_string(w.evidence.mode))},
                          {"rows", w.evidence.rows},
                          {"covered", w.evidence.covered()},
                          {"type_mismatches", w.evidence.type_mismatches}});
      if (w.sql_ev) {
        gold.push_back({exs[i].id, *w.sql_ev});
        answer.push_back({exs[i].id, w.answer_ev});
        hybrid.push_back({exs[i].id, w.hybrid_ev});
      }
    }
    files["stages/evidence.jsonl"] = jsonl(rows);
    json ev = {{"mode", std::string(to_string(m.evidence_mode))},
               {"n", sets.size()},
               {"coverage", sets.empty() ? json(nullptr) : json(evidence_coverage(sets))},
               {"gold_sql", with_sql},
               {"simple_sql", simple},
               {"simple_sql_coverage", with_sql ? json(static_cast<double>(simple) / static_cast<double>(with_sql)) : json(nullptr)}};
    if (!gold.empty()) {
      auto score_json = [](const DetectorScore& d) {
        return json{{"precision", d.precision}, {"recall", d.recall}, {"true_positives", d.true_positives},
                    {"predicted", d.predicted}, {"gold", d.gold}};
      };
      ev["detector_validation"] = {{"n", gold.size()},
                                   {"answer_string", score_json(validate_detector(answer, gold))},
                                   {"hybrid", score_json(validate_detector(hybrid, gold))}};
    }
    if (!b.judgments.empty()) {
      std::set<std::string> judges;
      for (const auto& j : b.judgments) judges.insert(j.judge);
      json kappas = json::object();
      for (auto a = judges.begin(); a != judges.end(); ++a) {
        for (auto c = std::next(a); c != judges.end(); ++c) {
          try {
            kappas[*a + "|" + *c] = audit_kappa(b.judgments, *a, *c);
          } catch (const Error&) {
            kappas[*a + "|" + *c] = nullptr;
          }
        }
      }
      ev["audit_kappa"] = kappas;
    }
    report["evidence"] = ev;
  }

  // sql anchor
  std::set<std::string> sql_exact_ids;
  if (m.stages.sql) {
    std::vector<json> rows;
    std::vector<DenotationPair> pairs;
    for (std::size_t i = 0; i < exs.size(); ++i) {
      const auto& w = work[i];
      if (!w.sql_ran) continue;
      const bool ok = w.oracle.status == OracleStatus::kOk;
      const bool compared = exs[i].task == Task::kQa;
      json r = {{"id", exs[i].id},
                {"status", std::string(to_string(w.oracle.status))},
                {"denotation", w.oracle.denotation},
                {"error", w.oracle.error_msg},
                {"simple", w.simple},
                {"compared", compared}};
      if (ok && w.verdict) {
        r["exact"] = w.verdict->exact;
        r["soft"] = w.verdict->soft;
        r["category"] = std::string(to_string(w.verdict->category));
        r["target_em"] = w.target_em;
        if (w.verdict->exact) sql_exact_ids.insert(exs[i].id);
        if (!w.verdict->exact) pairs.push_back({w.oracle.denotation, exs[i].gold_answers});
      }
      rows.push_back(std::move(r));
    }
    files["stages/sql.jsonl"] = jsonl(rows);
    auto outcomes = outcomes_from_rows(rows);
    if (!outcomes.empty()) {
      json ablation = json::object();
      for (const auto& [name, rate] : tolerance_ablation(pairs, default_tolerance_settings(), m.grounding)) {
        ablation[name] = pairs.empty() ? json(nullptr) : json(rate);
      }
      report["sql"] = {{"accounting", accounting_json(accounting(outcomes))}, {"tolerance_ablation", ablation}};
    }
  }

  // attribution
  if (m.stages.attribution) {
    json attr = json::object();
    for (const auto& [model, _] : b.predictions) {
      std::vector<AttributionRecord> recs;
      std::vector<SweepCase> cases;
      std::vector<json> rows;
      std::map<std::string, std::size_t> sources;
      std::size_t rule8 = 0;
      double em_sum = 0.0;
      for (std::size_t i = 0; i < exs.size(); ++i) {
        auto it = work[i].attribution.find(model);
        if (it == work[i].attribution.end()) continue;
        const auto& rec = it->second;
        recs.push_back(rec);
        cases.push_back({work[i].attribution_inputs.at(model), &b.table_of(exs[i])});
        ++sources[std::string(to_string(rec.oracle_source))];
        rule8 += rec.rule_trace.back().rfind("r8_", 0) == 0;
        em_sum += work[i].scores.count(model) ? work[i].scores.at(model).em : em(b.predictions.at(model).at(exs[i].id), exs[i].gold_answers);
        rows.push_back(json{{"id", rec.example_id},
                            {"label", std::string(to_string(rec.label))},
                            {"rule_trace", rec.rule_trace},
                            {"oracle_source", std::string(to_string(rec.oracle_source))}});
      }
      if (recs.empty()) continue;
      files["stages/attribution." + model + ".jsonl"] = jsonl(rows);
      auto all = attribution_distribution(recs);
      json a = {{"n", recs.size()},
                {"all", shares_json(all)},
                {"ok_rate", all.at(ErrorLabel::kOk)},
                {"em", em_sum / static_cast<double>(recs.size())},
                {"rule8", rule8},
                {"oracle_sources", sources}};
      std::set<std::string> subset;
      for (const auto& r : recs) {
        if (sql_exact_ids.count(r.example_id)) subset.insert(r.example_id);
      }
      a["sql_match_only"] = subset.empty() ? json(nullptr) : shares_json(attribution_distribution(recs, &subset));
      auto sweep = sensitivity_sweep(cases, default_sweep_configs());
      json sj = json::object();
      for (const auto& [name, shares] : sweep.per_config) sj[name] = shares_json(shares);
      json band = json::object();
      for (const auto& [label, bd] : sweep.band) band[std::string(to_string(label))] = json::array({bd.lo, bd.hi});
      a["sensitivity"] = {{"configs", sj}, {"band", band}};
      attr[model] = a;
    }
    report["attribution"] = attr;
  }

  // governance
  if (m.stages.governance && !lfs.empty()) {
    std::vector<Example> targets;
    for (const auto& ex : exs) {
      if (ex.task == Task::kVerdict) targets.push_back(ex);
    }
    if (targets.empty()) targets = exs;
    auto matrix = apply_lfs(lfs, targets, b.tables);
    std::map<std::string, std::string> gold;
    std::vector<json> rows;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      json votes = json::object();
      for (std::size_t j = 0; j < lfs.size(); ++j) {
        votes[lfs[j].name] = matrix.votes[i][j] ? json(*matrix.votes[i][j]) : json(nullptr);
      }
      json g = targets[i].task == Task::kVerdict ? json(targets[i].label) : json(nullptr);
      if (targets[i].task == Task::kVerdict) gold[targets[i].id] = targets[i].label;
      rows.push_back(json{{"id", targets[i].id}, {"votes", votes}, {"gold", g}});
    }
    files["stages/governance.jsonl"] = jsonl(rows);
    auto rep = governance_report(matrix, gold);
    json per_lf = json::array();
    for (const auto& s : rep.per_lf) {
      per_lf.push_back(json{{"name", s.name}, {"votes", s.votes}, {"coverage", s.coverage}, {"labeled", s.labeled},
                            {"correct", s.correct}, {"accuracy", opt_json(s.accuracy)}});
    }
    json g = {{"n", rep.n},
              {"lfs", matrix.lf_names},
              {"coverage", rep.coverage},
              {"conflict_rate", rep.conflict_rate},
              {"abstention_rate", rep.abstention_rate},
              {"lf_accuracy", opt_json(rep.lf_accuracy)},
              {"per_lf", per_lf},
              {"diagnostic_only", rep.diagnostic_only},
              {"lf_catalog_sha256", io::file_sha256(*m.lfs)}};
    std::vector<json> contrast_rows;
    json contrast = json::object();
    for (auto kind : {ContrastKind::kBiasStrip, ContrastKind::kComparatorSwap}) {
      const std::string kname(to_string(kind));
      auto cs = contrast_set(targets, kind);
      std::vector<std::string> triggered;
      for (std::size_t i = 0; i < targets.size(); ++i) {
        if (cs.triggered[i]) triggered.push_back(targets[i].id);
        contrast_rows.push_back(json{{"id", targets[i].id + "::" + kname},
                                     {"source_id", targets[i].id},
                                     {"kind", kname},
                                     {"question", cs.examples[i].question},
                                     {"triggered", static_cast<bool>(cs.triggered[i])}});
      }
      json flips = json::object();
      for (const auto& [model, preds] : b.predictions) {
        std::map<std::string, std::string> before, after;
        std::vector<std::string> evaluated;
        for (const auto& id : triggered) {
          auto p0 = preds.find(id);
          auto p1 = preds.find(id + "::" + kname);
          if (p0 == preds.end() || p1 == preds.end()) continue;
          before[id] = p0->second;
          after[id] = p1->second;
          evaluated.push_back(id);
        }
        if (!evaluated.empty()) flips[model] = {{"n", evaluated.size()}, {"flip_rate", flip_rate(before, after, evaluated)}};
      }
      contrast[kname] = {{"triggered", triggered.size()}, {"flips", flips}};
    }
    files["stages/contrast.jsonl"] = jsonl(contrast_rows);
    g["contrast"] = contrast;
    report["governance"] = g;
  }

  json provenance = json::object();
  for (const auto& [name, text] : files) provenance[name] = io::sha256_hex(text);
  report["provenance"] = provenance;

  result.exit_code = failure_rate > m.fail_soft_threshold ? 2 : 0;
  report["counts"]["exit_code"] = result.exit_code;

  std::error_code ec;
  fs::remove_all(out_dir / "stages", ec);
  fs::remove_all(out_dir / "plots", ec);
  for (const auto& [name, text] : files) io::write_text(out_dir / name, text);
  for (const auto& [name, text] : emit_plots(report)) io::write_text(out_dir / "plots" / name, text);
  io::write_text(out_dir / "summary.md", summary_markdown(report));
  io::write_text(out_dir / "report.json", io::dump_pretty(report));
  result.report = std::move(report);
  return result;
}

RunResult run(const RunManifest& manifest, const fs::path& out_dir, std::size_t workers) {
  return run(manifest, ingest(manifest.inputs), out_dir, workers);
}

std::map<std::string, std::string> emit_plots(const json& report) {
  auto num = [](const json& v) { return v.is_null() ? std::string() : v.dump(); };
  std::map<std::string, std::string> out;

  std::string recall = "retriever,recall@10,em\n";
  if (report.contains("retrieval")) {
    const json& ret = report.at("retrieval");
    for (const auto& [name, rec] : ret.at("recall").items()) {
      std::string em_cell;
      const json& bp = ret.at("budgeted_predictions");
      if (bp.contains(name) && report.contains("metrics")) {
        const json& models = report.at("metrics").at("models");
        const std::string tag = bp.at(name).get<std::string>();
        if (models.contains(tag)) em_cell = num(models.at(tag).at("em"));
      }
      recall += name + "," + (rec.contains("10") ? num(rec.at("10")) : std::string()) + "," + em_cell + "\n";
    }
  }
  out["recall_em.csv"] = recall;

  std::string attr = "model,label,share\n";
  if (report.contains("attribution")) {
    for (const auto& [model, a] : report.at("attribution").items()) {
      for (auto l : kAllLabels) {
        const std::string label(to_string(l));
        attr += model + "," + label + "," + num(a.at("all").at(label)) + "\n";
      }
    }
  }
  out["attribution.csv"] = attr;

  std::string contam = "probe,metric,before,after,delta\n";
  if (report.contains("probes")) {
    for (const auto& [model, kinds] : report.at("probes").at("deltas").items()) {
      for (const auto& [kind, d] : kinds.items()) {
        for (const auto& [metric, v] : d.items()) {
          if (metric == "n") continue;
          contam += kind + "," + model + "." + metric + "," + num(v.at("before")) + "," + num(v.at("after")) + "," +
                    num(v.at("delta")) + "\n";
        }
      }
    }
  }
  out["contamination.csv"] = contam;

  std::string bars = "model,metric,value,ci_lo,ci_hi\n";
  if (report.contains("metrics")) {
    for (const auto& [model, blk] : report.at("metrics").at("models").items()) {
      for (const char* metric : {"em", "f1"}) {
        const json& ci = blk.at(std::string("ci_") + metric);
        bars += model + "," + metric + "," + num(blk.at(metric)) + "," + num(ci[0]) + "," + num(ci[1]) + "\n";
      }
    }
  }
  out["qa_bars.csv"] = bars;
  return out;
}

namespace {

void verify_into(const fs::path& out_dir, VerifyResult& v) {
  const json report = json::parse(io::read_text(out_dir / "report.json"));
  auto check = [&](bool ok, const std::string& what) {
    ++v.checked;
    if (!ok) v.mismatches.push_back(what);
  };
  auto rows_of = [&](const std::string& name) { return io::read_jsonl(out_dir / name); };

  for (const auto& [name, digest] : report.at("provenance").items()) {
    std::error_code ec;
    bool exists = fs::exists(out_dir / name, ec);
    check(exists && io::file_sha256(out_dir / name) == digest.get<std::string>(), "digest of " + name);
  }

  if (report.contains("metrics")) {
    for (const auto& [model, blk] : report.at("metrics").at("models").items()) {
      std::vector<ExampleScore> scores;
      for (const auto& r : rows_of("stages/scores." + model + ".jsonl")) scores.push_back(score_from_row(r));
      auto block = aggregate_scores(scores, 0, 1);
      check(block.n == blk.at("n").get<std::size_t>(), "metrics." + model + ".n");
      if (block.n) {
        check(block.em == blk.at("em").get<double>(), "metrics." + model + ".em");
        check(block.f1 == blk.at("f1").get<double>(), "metrics." + model + ".f1");
      }
    }
  }

  if (report.contains("evidence") && !report.at("evidence").at("coverage").is_null()) {
    std::vector<EvidenceSet> sets;
    for (const auto& r : rows_of("stages/evidence.jsonl")) {
      EvidenceSet e;
      e.rows = r.at("rows").get<std::vector<std::size_t>>();
      sets.push_back(std::move(e));
    }
    check(!sets.empty() && evidence_coverage(sets) == report.at("evidence").at("coverage").get<double>(),
          "evidence.coverage");
  }

  if (report.contains("retrieval")) {
    std::map<std::string, std::map<std::string, std::vector<int>>> hits;
    for (const auto& r : rows_of("stages/recall.jsonl")) {
      for (const auto& [k, h] : r.at("hits").items()) hits[r.at("retriever").get<std::string>()][k].push_back(h.get<int>());
    }
    for (const auto& [name, rec] : report.at("retrieval").at("recall").items()) {
      for (const auto& [k, value] : rec.items()) {
        if (k == "n") continue;
        check(mean_hits(hits[name][k]) == value.get<double>(), "retrieval.recall." + name + "@" + k);
      }
    }
  }

  if (report.contains("sql")) {
    auto a = accounting(outcomes_from_rows(rows_of("stages/sql.jsonl")));
    const json& acc = report.at("sql").at("accounting");
    check(a.total == acc.at("total").get<std::size_t>() && a.executable == acc.at("executable").get<std::size_t>() &&
              a.exact == acc.at("exact").get<std::size_t>() && a.soft == acc.at("soft").get<std::size_t>() &&
              a.mismatches == acc.at("mismatches").get<std::size_t>() &&
              a.soft_resolved == acc.at("soft_resolved").get<std::size_t>() &&
              a.target_em == acc.at("target_em").get<std::size_t>(),
          "sql.accounting");
  }

  if (report.contains("attribution")) {
    for (const auto& [model, a] : report.at("attribution").items()) {
      std::vector<AttributionRecord> recs;
      bool replay_ok = true;
      for (const auto& r : rows_of("stages/attribution." + model + ".jsonl")) {
        AttributionRecord rec;
        rec.example_id = r.at("id").get<std::string>();
        rec.label = parse_error_label(r.at("label").get<std::string>());
        rec.rule_trace = r.at("rule_trace").get<std::vector<std::string>>();
        try {
          replay_ok = replay_ok && replay(rec.rule_trace) == rec.label;
        } catch (const Error&) {
          replay_ok = false;
        }
        recs.push_back(std::move(rec));
      }
      check(replay_ok, "attribution." + model + " rule-trace replay");
      auto shares = attribution_distribution(recs);
      for (auto l : kAllLabels) {
        const std::string label(to_string(l));
        check(shares.at(l) == a.at("all").at(label).get<double>(), "attribution." + model + "." + label);
      }
    }
  }

  if (report.contains("governance")) {
    const json& g = report.at("governance");
    auto rows = rows_of("stages/governance.jsonl");
    auto rep = governance_report(matrix_from_rows(rows, g.at("lfs").get<std::vector<std::string>>()),
                                 gold_labels_from_rows(rows));
    check(rep.coverage == g.at("coverage").get<double>(), "governance.coverage");
    check(rep.conflict_rate == g.at("conflict_rate").get<double>(), "governance.conflict_rate");
    check(rep.abstention_rate == g.at("abstention_rate").get<double>(), "governance.abstention_rate");
    check(rep.coverage + rep.abstention_rate == 1.0, "governance.coverage+abstention");
  }

  for (const auto& [name, text] : emit_plots(report)) {
    std::error_code ec;
    check(fs::exists(out_dir / "plots" / name, ec) && io::read_text(out_dir / "plots" / name) == text, "plots/" + name);
  }
}

}  // namespace

VerifyResult verify(const fs::path& out_dir) {
  VerifyResult v;
  try {
    verify_into(out_dir, v);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    // A stage file that no longer parses is a mismatch, not a crash.
    v.mismatches.push_back(std::string("unreadable outputs: ") + e.what());
  }
  return v;
}

}  // namespace glean
