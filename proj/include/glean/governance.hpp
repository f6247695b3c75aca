#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "glean/example.hpp"
#include "glean/table.hpp"

namespace glean {

enum class LfScope { kStatement, kTable, kBoth };
std::string_view to_string(LfScope s);
LfScope parse_lf_scope(std::string_view name);

/// Data-declared labeling function: emits `emit` when `pattern` (POSIX ERE,
/// case-insensitive) matches its scope, abstains otherwise.
struct LabelingFunction {
  std::string name;
  std::string pattern;
  std::string emit;
  LfScope scope = LfScope::kStatement;
  std::regex regex;
};

/// Throws Error(kBadPattern) on an invalid regex.
LabelingFunction make_lf(std::string name, std::string pattern, std::string emit, LfScope scope);
/// JSONL {"name","pattern","emit","scope"}. Duplicate names raise DuplicateId.
std::vector<LabelingFunction> load_lfs(const std::string& path);

/// Headers and cells joined by single spaces, row-major.
std::string flatten_table(const Table& t);

struct LabelMatrix {
  std::vector<std::string> ids;
  std::vector<std::string> lf_names;
  std::vector<std::vector<std::optional<std::string>>> votes;  // [example][lf]
};

using TableIndex = std::map<std::string, Table>;

/// Examples whose table is missing from `tables` are matched on the
/// statement only. Throws Error(kInvalidArgument) when `lfs` is empty.
LabelMatrix apply_lfs(const std::vector<LabelingFunction>& lfs, const std::vector<Example>& examples,
                      const TableIndex& tables);

struct LfStats {
  std::string name;
  std::size_t votes = 0;
  double coverage = 0.0;
  std::size_t labeled = 0;  // votes on examples that carry a gold label
  std::size_t correct = 0;
  std::optional<double> accuracy;
};

struct GovernanceReport {
  std::size_t n = 0;
  double coverage = 0.0;
  double conflict_rate = 0.0;
  double abstention_rate = 0.0;
  std::optional<double> lf_accuracy;  // pooled over all labeled votes
  std::vector<LfStats> per_lf;
  bool diagnostic_only = false;
};

inline constexpr double kDiagnosticCoverage = 0.25;

/// `gold` maps example id to its label; unlabeled examples only count towards
/// coverage and conflict.
GovernanceReport governance_report(const LabelMatrix& m, const std::map<std::string, std::string>& gold);

enum class ContrastKind { kBiasStrip, kComparatorSwap };
std::string_view to_string(ContrastKind k);
ContrastKind parse_contrast_kind(std::string_view name);

/// Removes whole-token not/all/most/none, collapsing the whitespace left behind.
std::string bias_strip(std::string_view s);
/// more<->less, higher<->lower, greater<->smaller, most<->least, keeping case.
std::string comparator_swap(std::string_view s);

struct ContrastSet {
  std::vector<Example> examples;
  std::vector<bool> triggered;
};

ContrastSet contrast_set(const std::vector<Example>& examples, ContrastKind kind);

/// Fraction of triggered ids whose prediction changed; 0 when none triggered.
/// Throws Error(kIdMismatch) unless before and after cover the same ids and
/// every triggered id is among them.
double flip_rate(const std::map<std::string, std::string>& before, const std::map<std::string, std::string>& after,
                 const std::vector<std::string>& triggered);

}  // namespace glean
