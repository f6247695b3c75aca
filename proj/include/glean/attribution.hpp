#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "glean/evidence.hpp"
#include "glean/table.hpp"

namespace glean {

enum class ErrorLabel { kOk, kL0, kL0_5, kL1, kL2, kL3, kL4 };

inline constexpr std::array<ErrorLabel, 7> kAllLabels = {ErrorLabel::kOk, ErrorLabel::kL0, ErrorLabel::kL0_5,
                                                         ErrorLabel::kL1, ErrorLabel::kL2, ErrorLabel::kL3,
                                                         ErrorLabel::kL4};

/// "OK", "L0", "L0_5", "L1", ... "L4".
std::string_view to_string(ErrorLabel l);
ErrorLabel parse_error_label(std::string_view name);

enum class OracleSource { kSql, kGoldAnswer };
std::string_view to_string(OracleSource s);
OracleSource parse_oracle_source(std::string_view name);

enum class SqlStatus { kNone, kOk, kExecError };

struct RetrievalInfo {
  EvidenceSet evidence;
  std::set<std::size_t> survived;
};

struct AttributionInput {
  std::string example_id;
  std::string prediction;
  std::vector<std::string> oracle;
  OracleSource oracle_source = OracleSource::kGoldAnswer;
  std::optional<RetrievalInfo> retrieval;
  SqlStatus sql_status = SqlStatus::kNone;
};

struct AttributionRecord {
  std::string example_id;
  ErrorLabel label = ErrorLabel::kOk;
  /// One "rule=outcome" entry per evaluated rule, plus the grounding facts
  /// consumed by rules 5-8. The last rule entry is the one that fired.
  std::vector<std::string> rule_trace;
  OracleSource oracle_source = OracleSource::kGoldAnswer;

  bool operator==(const AttributionRecord&) const = default;
};

/// Applies rules 1-8 in order. `match_cfg` drives the oracle match (rule 2),
/// `ground_cfg` decides table-groundedness (rules 5-8); under the all-elements
/// policy a multi-value gold is grounded only when every element is.
/// Throws Error(kMissingOracle) when the oracle is empty and the SQL status is
/// not an execution error.
AttributionRecord attribute(const AttributionInput& in, const Table& t, const GroundingConfig& ground_cfg,
                            const GroundingConfig& match_cfg);
inline AttributionRecord attribute(const AttributionInput& in, const Table& t, const GroundingConfig& cfg) {
  return attribute(in, t, cfg, cfg);
}

/// Re-derives the label from a rule trace alone. Throws Error(kMalformedInput)
/// on a trace that is out of order or internally inconsistent.
ErrorLabel replay(const std::vector<std::string>& rule_trace);

using LabelShares = std::map<ErrorLabel, double>;

/// Shares over all seven labels. When `subset` is given only those ids count.
/// Throws Error(kInvalidArgument) when nothing is left to count.
LabelShares attribution_distribution(const std::vector<AttributionRecord>& records,
                                     const std::set<std::string>* subset = nullptr);

struct NamedConfig {
  std::string name;
  GroundingConfig cfg;
};

struct Band {
  double lo = 0.0;
  double hi = 0.0;
};

struct SweepReport {
  std::vector<std::pair<std::string, LabelShares>> per_config;
  std::map<ErrorLabel, Band> band;
};

struct SweepCase {
  AttributionInput input;
  const Table* table = nullptr;
};

/// Attributes every case under each grounding config, holding the oracle match
/// config fixed. Throws Error(kInvalidArgument) with fewer than two configs.
SweepReport sensitivity_sweep(const std::vector<SweepCase>& cases, const std::vector<NamedConfig>& configs,
                              const GroundingConfig& match_cfg = GroundingConfig::exact());

/// Substring on/off crossed with any/all multi-value policy.
std::vector<NamedConfig> default_sweep_configs();

}  // namespace glean
