#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "glean/table.hpp"

namespace glean {

struct RowDocument {
  std::size_t row_index = 0;
  /// Header tokens of each column followed by that column's cell tokens.
  std::vector<std::string> tokens;
  std::vector<std::string> header_tokens;
  std::vector<std::string> cell_tokens;
  /// Tokens of every cell separately (cell-level scoring).
  std::vector<std::vector<std::string>> cells;
};

std::vector<RowDocument> build_row_docs(const Table& t);

struct Ranking {
  std::string retriever;
  std::vector<std::size_t> order;  // best first
  std::vector<double> scores;      // parallel to order, non-increasing

  bool operator==(const Ranking&) const = default;
};

/// Sorts rows by descending score, ascending row index on ties.
Ranking ranking_from_scores(std::string retriever, const std::vector<double>& scores);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Okapi BM25 over plain token lists, one score per document:
///   sum over distinct query terms t of
///   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl)),
///   idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)).
std::vector<double> bm25_scores(const std::vector<std::string>& query,
                                const std::vector<std::vector<std::string>>& docs,
                                Bm25Params params = {});

struct Bm25fParams {
  double k1 = 1.2;
  double b = 0.75;
  double header_weight = 0.5;
  double cell_weight = 1.0;
};

std::vector<double> bm25f_scores(const std::vector<std::string>& query, const std::vector<RowDocument>& docs,
                                 Bm25fParams params = {});

/// Cosine similarity of ln(1+tf) * ln((N+1)/(df+1)) weighted vectors.
std::vector<double> tfidf_scores(const std::vector<std::string>& query,
                                 const std::vector<std::vector<std::string>>& docs);

/// BM25 with every cell as its own document; a row scores its best cell.
std::vector<double> cell_bm25_scores(const std::vector<std::string>& query, const std::vector<RowDocument>& docs,
                                     Bm25Params params = {});

enum class SparseKind { kTfidf, kBm25, kBm25f, kCellBm25 };
std::string_view to_string(SparseKind k);
SparseKind parse_sparse_kind(std::string_view name);

/// Throws Error(kInvalidArgument) on an empty document list.
Ranking rank(const std::vector<std::string>& query, const std::vector<RowDocument>& docs, SparseKind kind);

struct EmbeddingTable {
  std::string model_tag;
  std::vector<double> question_vec;
  std::vector<std::vector<double>> row_vecs;
};

/// Cosine ranking; zero vectors score 0. Throws Error(kDimensionMismatch).
Ranking rank_dense(const EmbeddingTable& emb);

/// Reciprocal-rank fusion with 1-based ranks. Throws Error(kRowSetMismatch).
Ranking fuse_hybrid(const Ranking& a, const Ranking& b, int k = 60);

/// Evidence rows first (ascending), then the rest ascending.
Ranking rank_sql_gold(const std::vector<std::size_t>& evidence, std::size_t n_rows);

/// hit@k for each k. Throws Error(kEmptyEvidence).
std::map<std::size_t, int> recall_at_k(const Ranking& r, const std::vector<std::size_t>& evidence,
                                       const std::vector<std::size_t>& ks);

/// 1-based rank of the first evidence row, if any.
std::optional<std::size_t> first_hit_rank(const Ranking& r, const std::vector<std::size_t>& evidence);

struct PrunedContext {
  /// Included rows in the order they were added (retriever rank).
  std::vector<std::size_t> rows;
  /// Surviving columns in original order.
  std::vector<std::size_t> cols;
  /// Sum of count_tokens over the included full-width markdown rows.
  std::size_t row_tokens = 0;
  /// A single row alone exceeded the budget; the context row is truncated.
  bool oversize = false;
  /// Markdown table of the surviving rows (original order) and columns.
  std::string context;
};

/// Greedy row packing by rank until the next row would exceed
/// max_table_tokens (at least one row), then the max_cols columns with the
/// highest question Jaccard (ties by lower index).
PrunedContext budget_prune(const Table& t, const Ranking& r, const std::vector<std::string>& question_tokens,
                           const TokenBudget& budget);

/// Prefix of `s` holding its first `n` budget tokens.
std::string truncate_to_tokens(std::string_view s, std::size_t n);

struct HitRecord {
  std::optional<std::size_t> hit_rank;  // 1-based; nullopt = no evidence row ranked
  double em = 0.0;
  double f1 = 0.0;
};

struct Stratum {
  std::size_t n = 0;
  std::optional<double> em;
  std::optional<double> f1;
};

struct StrataReport {
  Stratum hit_at_1;
  Stratum miss_at_1;
  /// Buckets "1", "2", "3-5", "6-10", "miss".
  std::map<std::string, Stratum> buckets;
};

/// Throws Error(kInvalidArgument) on empty input.
StrataReport hit_rank_stratify(const std::vector<HitRecord>& records);

}  // namespace glean
