#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "glean/bundle.hpp"
#include "glean/evidence.hpp"
#include "glean/metrics.hpp"
#include "glean/probes.hpp"
#include "glean/table.hpp"

namespace glean {

inline constexpr const char* kToolVersion = "0.3.0";

struct StageToggles {
  bool probes = true;
  bool retrieval = true;
  bool metrics = true;
  bool evidence = true;
  bool sql = true;
  bool attribution = true;
  bool governance = true;
};

struct RunManifest {
  std::string run_id = "run";
  std::uint64_t global_seed = 0;
  std::string dataset = "dataset";
  BundlePaths inputs;
  std::optional<std::filesystem::path> lfs;
  std::optional<std::filesystem::path> templates;
  /// JSONL {"id","text"} documents indexed for the n-gram overlap probe.
  std::optional<std::filesystem::path> contamination_corpus;
  StageToggles stages;
  GroundingConfig grounding;
  TokenBudget budget;
  /// tfidf, bm25, bm25f, cell_bm25, dense, hybrid (bm25 + dense), sql_gold,
  /// or scores:<tag> for an ingested row-score file.
  std::vector<std::string> retrievers = {"tfidf", "bm25", "bm25f", "cell_bm25", "sql_gold"};
  std::string prune_retriever = "bm25";
  std::vector<std::size_t> ks = {1, 2, 5, 10};
  std::vector<ProbeKind> probes = {ProbeKind::kCanary,      ProbeKind::kNgramOverlap, ProbeKind::kEntitySwap,
                                   ProbeKind::kParaphrase,  ProbeKind::kRowPermute,   ProbeKind::kColPermute,
                                   ProbeKind::kSchemaRename, ProbeKind::kCounterfactualSwap};
  EvidenceMode evidence_mode = EvidenceMode::kAnswerString;
  double hybrid_theta = 0.2;
  std::size_t bootstrap_resamples = 1000;
  std::size_t ngram_n = 8;
  double artifact_holdout = 0.2;
  std::size_t artifact_epochs = 500;
  double artifact_lr = 0.1;
  /// Retriever name -> model tag whose predictions were produced from that
  /// retriever's budgeted contexts (feeds the recall-vs-EM plot).
  std::map<std::string, std::string> budgeted_predictions;
  double fail_soft_threshold = 0.05;

  /// The manifest as written, echoed into the report.
  nlohmann::json source;

  void validate() const;
};

/// Relative paths resolve against the manifest's directory. Throws
/// SchemaError on unknown keys or ill-typed values.
RunManifest load_manifest(const std::filesystem::path& path);
RunManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

struct StageError {
  std::string id;
  std::string stage;
  std::string code;
  std::string message;
};

struct RunResult {
  nlohmann::json report;
  std::vector<StageError> errors;
  std::size_t failed_examples = 0;
  int exit_code = 0;
};

/// GLEAN_WORKERS when set to a positive integer, else the hardware
/// concurrency (at least 1).
std::size_t workers_from_env();

/// Runs every enabled stage and writes report.json, summary.md, plots/*.csv
/// and stages/*.jsonl under `out_dir`. Outputs do not depend on `workers`.
RunResult run(const RunManifest& manifest, const DatasetBundle& bundle, const std::filesystem::path& out_dir,
              std::size_t workers);
/// Ingests the manifest inputs first; schema errors propagate.
RunResult run(const RunManifest& manifest, const std::filesystem::path& out_dir, std::size_t workers);

/// One CSV per figure family, derived from the report alone.
std::map<std::string, std::string> emit_plots(const nlohmann::json& report);

struct VerifyResult {
  std::size_t checked = 0;
  std::vector<std::string> mismatches;
  bool ok() const { return mismatches.empty(); }
};

/// Recomputes report numbers from the stage files in `out_dir`.
VerifyResult verify(const std::filesystem::path& out_dir);

struct ArtifactResult {
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  ClassifierMetrics held_out;
  LinearModel model;
};

/// Feature-only logistic regression on verdict examples (entailed = 1).
/// Each example lands in the held-out split with probability `holdout`,
/// decided by a hash of (seed, id). Throws Error(kSingleClass) when a split
/// lacks a class.
ArtifactResult artifact_detector(const std::vector<Example>& examples, const TableIndex& tables,
                                 std::uint64_t seed, double holdout, unsigned groups = kAllFeatures,
                                 std::size_t epochs = 500, double lr = 0.1);

/// Runs fn(i) for i in [0, n) on `workers` threads; exceptions escape fn only
/// as std::terminate, so fn must catch its own.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

nlohmann::json to_json(const GroundingConfig& cfg);
GroundingConfig grounding_from_json(const nlohmann::json& j);

}  // namespace glean
