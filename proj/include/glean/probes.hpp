#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "glean/example.hpp"
#include "glean/metrics.hpp"
#include "glean/table.hpp"

namespace glean {

enum class ProbeKind {
  kCanary,
  kNgramOverlap,
  kEntitySwap,
  kParaphrase,
  kRowPermute,
  kColPermute,
  kSchemaRename,
  kCounterfactualSwap,
};

std::string_view to_string(ProbeKind kind);
ProbeKind parse_probe_kind(std::string_view name);

enum class LabelClaim { kPreserving, kStress, kUnknown };
std::string_view to_string(LabelClaim claim);

struct PerturbedExample {
  std::string source_id;
  ProbeKind probe = ProbeKind::kParaphrase;
  Example example;
  LabelClaim claim = LabelClaim::kUnknown;
  /// Set when the probe changed the table; its id is the example's table_id.
  std::optional<Table> table;
  /// Row or column permutation (new position i holds old index perm[i]).
  std::vector<std::size_t> permutation;
};

enum class Axis { kRows, kCols };

struct PermutedTable {
  Table table;
  std::vector<std::size_t> permutation;
};

PermutedTable permute(const Table& t, Axis axis, std::uint64_t seed);
/// Undoes `permute`: inverse_permute(permute(t).table, axis, perm) == t.
Table inverse_permute(const Table& t, Axis axis, const std::vector<std::size_t>& permutation);

enum class RenameMode { kGeneric, kSynonymMap };

/// Generic mode yields col_1..col_n. Synonym mode throws Error(kUnknownHeader)
/// for keys that are not headers and Error(kDuplicateHeader) on collisions.
Table rename_schema(const Table& t, RenameMode mode,
                    const std::map<std::string, std::string>& synonyms = {});

/// Question span matched to a table cell.
struct EntityMention {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t row = 0;
  std::size_t col = 0;
};

/// Non-overlapping cell mentions in the question, claimed longest first and
/// returned in question order. Text cells need >= 3 characters and match
/// case-insensitively on word boundaries; numeric cells must equal a whole
/// question token.
std::vector<EntityMention> find_mentions(std::string_view question, const Table& t);

/// Throws Error(kNoSwapPossible).
PerturbedExample counterfactual_swap(const Example& ex, const Table& t, std::uint64_t seed);
/// Throws Error(kNoSwapPossible).
PerturbedExample entity_swap(const Example& ex, const Table& t, std::uint64_t seed);

struct ParaphraseTemplate {
  std::string pattern;  // POSIX ERE, case-insensitive
  std::string rewrite;  // sed-style \1 references
  std::regex regex;
};

/// Throws Error(kBadPattern).
ParaphraseTemplate make_template(std::string pattern, std::string rewrite);
/// JSONL of {"pattern", "rewrite"}.
std::vector<ParaphraseTemplate> load_templates(const std::filesystem::path& path);

/// First matching template wins. Throws Error(kNoTemplateMatch).
PerturbedExample paraphrase(const Example& ex, const std::vector<ParaphraseTemplate>& catalog,
                            std::uint64_t seed);

/// Appends the canary to a seeded cell (a new row for an empty table).
/// Throws Error(kCanaryCollision) when it already occurs in the table or question.
PerturbedExample inject_canary(const Example& ex, const Table& t, const std::string& canary,
                               std::uint64_t seed);

/// Ids (sorted, unique) whose text contains the canary.
std::vector<std::string> detect_canary(const std::vector<std::pair<std::string, std::string>>& texts,
                                       std::string_view canary);

class NgramIndex {
 public:
  explicit NgramIndex(std::size_t n = 8);
  void add(std::string_view document);
  bool contains(const std::string& gram) const { return grams_.count(gram) > 0; }
  std::size_t n() const { return n_; }
  std::size_t size() const { return grams_.size(); }

 private:
  std::size_t n_;
  std::unordered_set<std::string> grams_;
};

/// Token n-grams of a normalized text, joined with U+001F.
std::vector<std::string> ngrams(std::string_view text, std::size_t n);

/// Fraction of the text's n-grams present in the index; 0 below n tokens.
double ngram_overlap(std::string_view text, const NgramIndex& index);

struct MetricDelta {
  double before = 0.0;
  double after = 0.0;
  double delta = 0.0;
};

using DeltaReport = std::map<std::string, MetricDelta>;

/// after - before per metric. Throws Error(kIdMismatch) unless the id sets agree.
DeltaReport probe_delta(const MetricBlock& before, const MetricBlock& after);

/// Shared inputs for applying a probe kind to one example.
struct ProbeContext {
  std::uint64_t global_seed = 0;
  const std::vector<ParaphraseTemplate>* templates = nullptr;
  std::string canary_prefix = "GLEAN-";
};

/// Deterministic canary string for an example.
std::string canary_for(const ProbeContext& ctx, std::string_view example_id);

/// Dispatches a transform probe (not kNgramOverlap) with the per-example seed.
PerturbedExample apply_probe(ProbeKind kind, const Example& ex, const Table& t,
                             const ProbeContext& ctx);

}  // namespace glean
