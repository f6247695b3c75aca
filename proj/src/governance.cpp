#include "glean/governance.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "glean/error.hpp"
#include "glean/io.hpp"

namespace glean {
namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

/// Calls fn(word) for each maximal word-character run; fn returns the
/// replacement text for that run.
template <typename Fn>
std::string map_words(std::string_view s, Fn fn) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_char(static_cast<unsigned char>(s[i]))) {
      out.push_back(s[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_word_char(static_cast<unsigned char>(s[j]))) ++j;
    out += fn(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (c == ' ') {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::string match_case(std::string_view like, std::string_view word) {
  std::string out(word);
  bool all_upper = std::all_of(like.begin(), like.end(), [](unsigned char c) { return std::isupper(c); });
  if (all_upper && like.size() > 1) {
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  } else if (!like.empty() && std::isupper(static_cast<unsigned char>(like[0]))) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  return out;
}

}  // namespace

std::string_view to_string(LfScope s) {
  switch (s) {
    case LfScope::kStatement: return "statement";
    case LfScope::kTable: return "table";
    case LfScope::kBoth: return "both";
  }
  return "statement";
}

LfScope parse_lf_scope(std::string_view name) {
  if (name == "statement") return LfScope::kStatement;
  if (name == "table") return LfScope::kTable;
  if (name == "both") return LfScope::kBoth;
  throw Error(ErrorCode::kInvalidArgument, "unknown LF scope '" + std::string(name) + "'");
}

LabelingFunction make_lf(std::string name, std::string pattern, std::string emit, LfScope scope) {
  if (name.empty() || emit.empty()) throw Error(ErrorCode::kInvalidArgument, "LF needs a name and an emit label");
  LabelingFunction lf{std::move(name), std::move(pattern), std::move(emit), scope, {}};
  try {
    lf.regex = std::regex(lf.pattern, std::regex::extended | std::regex::icase | std::regex::optimize);
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::kBadPattern, "LF '" + lf.name + "': " + e.what());
  }
  return lf;
}

std::vector<LabelingFunction> load_lfs(const std::string& path) {
  std::vector<LabelingFunction> out;
  std::set<std::string> names;
  io::for_each_jsonl(path, [&](const io::json& j, std::size_t line) {
    std::string name = io::require_string(j, "name");
    if (!names.insert(name).second) {
      throw Error(ErrorCode::kDuplicateId, path + ":" + std::to_string(line) + ": duplicate LF '" + name + "'");
    }
    LfScope scope = j.contains("scope") ? parse_lf_scope(io::require_string(j, "scope")) : LfScope::kStatement;
    out.push_back(make_lf(name, io::require_string(j, "pattern"), io::require_string(j, "emit"), scope));
  });
  return out;
}

std::string flatten_table(const Table& t) {
  std::string out;
  auto add = [&](const std::string& s) {
    if (!out.empty()) out.push_back(' ');
    out += s;
  };
  for (const auto& h : t.headers()) add(h);
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) add(t.raw(r, c));
  }
  return out;
}

LabelMatrix apply_lfs(const std::vector<LabelingFunction>& lfs, const std::vector<Example>& examples,
                      const TableIndex& tables) {
  if (lfs.empty()) throw Error(ErrorCode::kInvalidArgument, "no labeling functions");
  LabelMatrix m;
  for (const auto& lf : lfs) m.lf_names.push_back(lf.name);
  for (const auto& ex : examples) {
    m.ids.push_back(ex.id);
    auto it = tables.find(ex.table_id);
    const std::string flat = it == tables.end() ? std::string() : flatten_table(it->second);
    std::vector<std::optional<std::string>> row;
    for (const auto& lf : lfs) {
      bool stmt = lf.scope != LfScope::kTable && std::regex_search(ex.question, lf.regex);
      bool table = lf.scope != LfScope::kStatement && it != tables.end() && std::regex_search(flat, lf.regex);
      if (stmt || table) {
        row.emplace_back(lf.emit);
      } else {
        row.emplace_back(std::nullopt);
      }
    }
    m.votes.push_back(std::move(row));
  }
  return m;
}

GovernanceReport governance_report(const LabelMatrix& m, const std::map<std::string, std::string>& gold) {
  GovernanceReport rep;
  rep.n = m.ids.size();
  if (rep.n == 0) throw Error(ErrorCode::kInvalidArgument, "governance report over zero examples");
  std::size_t covered = 0;
  std::size_t conflicted = 0;
  std::vector<LfStats> stats(m.lf_names.size());
  for (std::size_t j = 0; j < stats.size(); ++j) stats[j].name = m.lf_names[j];
  for (std::size_t i = 0; i < rep.n; ++i) {
    std::set<std::string> labels;
    auto g = gold.find(m.ids[i]);
    for (std::size_t j = 0; j < stats.size(); ++j) {
      const auto& v = m.votes[i][j];
      if (!v) continue;
      labels.insert(*v);
      ++stats[j].votes;
      if (g != gold.end()) {
        ++stats[j].labeled;
        if (*v == g->second) ++stats[j].correct;
      }
    }
    if (!labels.empty()) ++covered;
    if (labels.size() >= 2) ++conflicted;
  }
  const double n = static_cast<double>(rep.n);
  rep.coverage = static_cast<double>(covered) / n;
  rep.abstention_rate = 1.0 - rep.coverage;
  rep.conflict_rate = covered ? static_cast<double>(conflicted) / static_cast<double>(covered) : 0.0;
  std::size_t labeled = 0;
  std::size_t correct = 0;
  for (auto& s : stats) {
    s.coverage = static_cast<double>(s.votes) / n;
    if (s.labeled) s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.labeled);
    labeled += s.labeled;
    correct += s.correct;
  }
  if (labeled) rep.lf_accuracy = static_cast<double>(correct) / static_cast<double>(labeled);
  rep.per_lf = std::move(stats);
  rep.diagnostic_only = rep.coverage < kDiagnosticCoverage;
  return rep;
}

std::string_view to_string(ContrastKind k) {
  return k == ContrastKind::kBiasStrip ? "bias_strip" : "comparator_swap";
}

ContrastKind parse_contrast_kind(std::string_view name) {
  if (name == "bias_strip") return ContrastKind::kBiasStrip;
  if (name == "comparator_swap") return ContrastKind::kComparatorSwap;
  throw Error(ErrorCode::kInvalidArgument, "unknown contrast kind '" + std::string(name) + "'");
}

std::string bias_strip(std::string_view s) {
  static const std::set<std::string> kStrip = {"not", "all", "most", "none"};
  bool changed = false;
  std::string out = map_words(s, [&](std::string_view w) -> std::string {
    if (kStrip.count(ascii_lower(w))) {
      changed = true;
      return "";
    }
    return std::string(w);
  });
  return changed ? collapse_spaces(out) : std::string(s);
}

std::string comparator_swap(std::string_view s) {
  static const std::map<std::string, std::string> kSwap = {
      {"more", "less"},     {"less", "more"},       {"higher", "lower"}, {"lower", "higher"},
      {"greater", "smaller"}, {"smaller", "greater"}, {"most", "least"},   {"least", "most"},
  };
  return map_words(s, [&](std::string_view w) {
    auto it = kSwap.find(ascii_lower(w));
    return it == kSwap.end() ? std::string(w) : match_case(w, it->second);
  });
}

ContrastSet contrast_set(const std::vector<Example>& examples, ContrastKind kind) {
  ContrastSet out;
  for (const auto& ex : examples) {
    Example p = ex;
    p.question = kind == ContrastKind::kBiasStrip ? bias_strip(ex.question) : comparator_swap(ex.question);
    out.triggered.push_back(p.question != ex.question);
    out.examples.push_back(std::move(p));
  }
  return out;
}

double flip_rate(const std::map<std::string, std::string>& before, const std::map<std::string, std::string>& after,
                 const std::vector<std::string>& triggered) {
  auto same_keys = before.size() == after.size() &&
                   std::equal(before.begin(), before.end(), after.begin(),
                              [](const auto& a, const auto& b) { return a.first == b.first; });
  if (!same_keys) throw Error(ErrorCode::kIdMismatch, "flip_rate: prediction sets cover different ids");
  std::size_t flipped = 0;
  for (const auto& id : triggered) {
    auto b = before.find(id);
    if (b == before.end()) throw Error(ErrorCode::kIdMismatch, "flip_rate: triggered id '" + id + "' has no prediction");
    if (b->second != after.at(id)) ++flipped;
  }
  return triggered.empty() ? 0.0 : static_cast<double>(flipped) / static_cast<double>(triggered.size());
}

}  // namespace glean
