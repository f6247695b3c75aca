#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glean/evidence.hpp"
#include "glean/example.hpp"
#include "glean/governance.hpp"
#include "glean/retrieval.hpp"
#include "glean/table.hpp"

namespace glean {

struct GoldSqlEntry {
  std::string sql;
  std::optional<std::filesystem::path> db_path;  // absolute after ingest
};

using Predictions = std::map<std::string, std::string>;  // id -> prediction

struct DatasetBundle {
  TableIndex tables;
  std::vector<Example> examples;  // sorted by id
  std::map<std::string, Predictions> predictions;  // model tag -> predictions
  std::map<std::string, GoldSqlEntry> gold_sql;    // example id -> entry
  std::map<std::string, EmbeddingTable> embeddings;
  std::map<std::string, std::map<std::string, double>> classifier_scores;           // tag -> id -> score
  std::map<std::string, std::map<std::string, std::vector<double>>> row_scores;     // tag -> id -> per row
  std::vector<AuditJudgment> judgments;

  const Example* find(const std::string& id) const;
  const Table& table_of(const Example& ex) const { return tables.at(ex.table_id); }
};

struct BundlePaths {
  std::filesystem::path tables;
  std::filesystem::path examples;
  std::map<std::string, std::filesystem::path> predictions;
  std::optional<std::filesystem::path> gold_sql;
  std::optional<std::filesystem::path> embeddings;
  std::map<std::string, std::filesystem::path> classifier_scores;
  std::map<std::string, std::filesystem::path> row_scores;
  std::optional<std::filesystem::path> judgments;
};

/// Splits "source::suffix" ids used for perturbed and contrast examples.
/// Returns the source id when the suffix names a probe or contrast kind.
std::optional<std::string> derived_source(const std::string& id);

/// Loads and cross-checks every file. Throws SchemaError(file, line),
/// Error(kDuplicateId) and Error(kDanglingReference).
DatasetBundle ingest(const BundlePaths& paths);

/// Writes the bundle as JSONL files under `dir` and returns their paths.
BundlePaths write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

/// Up to `per_label` examples of each verdict label (qa examples grouped
/// under their task), chosen by a seeded shuffle; returned sorted by id.
std::vector<Example> stratified_sample(const std::vector<Example>& examples, std::size_t per_label,
                                       std::uint64_t seed);

}  // namespace glean
