#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "glean/example.hpp"
#include "glean/sql.hpp"
#include "glean/table.hpp"

namespace glean {

enum class EvidenceMode { kAnswerString, kSql, kHybrid };

std::string_view to_string(EvidenceMode m);
/// Accepts "answer_string"/"answer", "sql", "hybrid".
EvidenceMode parse_evidence_mode(std::string_view name);

struct EvidenceSet {
  EvidenceMode mode = EvidenceMode::kAnswerString;
  std::vector<std::size_t> rows;  // ascending, unique
  /// Numeric-vs-text comparisons seen while evaluating a WHERE clause.
  std::size_t type_mismatches = 0;

  bool covered() const { return !rows.empty(); }
};

/// Rows holding a cell that matches any gold value under `cfg`. Gold values
/// that normalize to the empty string ground nothing.
EvidenceSet detect_answer_rows(const Table& t, const std::vector<std::string>& gold,
                               const GroundingConfig& cfg);

/// Throws Error(kNotSimple) unless classify_simple(q); Error(kUnknownColumn).
EvidenceSet derive_sql_rows(const Table& t, const SqlQuery& q);

/// Answer rows, plus rows with question/row Jaccard >= theta, plus the single
/// best-overlap row (lowest index on ties) when both are empty.
EvidenceSet detect_hybrid(const Table& t, const Example& ex, const GroundingConfig& cfg,
                          double theta = 0.2);

/// Throws Error(kInvalidArgument) on an empty list.
double evidence_coverage(const std::vector<EvidenceSet>& sets);

struct DetectorScore {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

struct IdEvidence {
  std::string id;
  EvidenceSet evidence;
};

/// Micro-averaged row precision/recall. Throws Error(kIdMismatch).
DetectorScore validate_detector(std::vector<IdEvidence> pred, std::vector<IdEvidence> gold);

struct AuditJudgment {
  std::string id;
  std::size_t row = 0;
  std::string judgment;  // supported | not_supported | uncertain
  std::string judge;
};

/// Cohen's kappa between two judges over the (id, row) items both judged.
double audit_kappa(const std::vector<AuditJudgment>& judgments, const std::string& judge_a,
                   const std::string& judge_b);

}  // namespace glean
