#include "glean/probes.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "glean/error.hpp"
#include "glean/io.hpp"
#include "glean/rng.hpp"

namespace glean {
namespace {

constexpr std::string_view kProbeNames[] = {"canary",     "ngram_overlap", "entity_swap",
                                            "paraphrase", "row_permute",   "col_permute",
                                            "schema_rename", "counterfactual_swap"};

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool on_word_boundary(std::string_view s, std::size_t begin, std::size_t end) {
  bool left = begin == 0 || !is_word_byte(s[begin - 1]) || !is_word_byte(s[begin]);
  bool right = end == s.size() || !is_word_byte(s[end]) || !is_word_byte(s[end - 1]);
  return left && right;
}

// Whitespace-delimited tokens with surrounding ASCII punctuation trimmed.
std::vector<std::pair<std::size_t, std::size_t>> question_tokens(std::string_view q) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  auto punct = [](unsigned char c) { return c < 0x80 && !is_word_byte(c) && !is_space(c) && c != '-' && c != '+'; };
  while (i < q.size()) {
    while (i < q.size() && is_space(q[i])) ++i;
    std::size_t b = i;
    while (i < q.size() && !is_space(q[i])) ++i;
    std::size_t e = i;
    while (b < e && punct(q[b])) ++b;
    while (e > b && punct(q[e - 1])) --e;
    if (e > b) out.emplace_back(b, e);
  }
  return out;
}

std::string perturbed_table_id(const Example& ex, ProbeKind kind) {
  return ex.table_id + "::" + std::string(to_string(kind)) + "::" + ex.id;
}

PerturbedExample make_result(const Example& ex, ProbeKind kind, LabelClaim claim) {
  PerturbedExample out;
  out.source_id = ex.id;
  out.probe = kind;
  out.claim = claim;
  out.example = ex;
  out.example.id = ex.id + "::" + std::string(to_string(kind));
  return out;
}

}  // namespace

std::string_view to_string(ProbeKind kind) { return kProbeNames[static_cast<int>(kind)]; }

ProbeKind parse_probe_kind(std::string_view name) {
  for (int i = 0; i < 8; ++i) {
    if (kProbeNames[i] == name) return static_cast<ProbeKind>(i);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown probe kind '" + std::string(name) + "'");
}

std::string_view to_string(LabelClaim claim) {
  switch (claim) {
    case LabelClaim::kPreserving: return "preserving";
    case LabelClaim::kStress: return "stress";
    case LabelClaim::kUnknown: return "unknown";
  }
  return "unknown";
}

PermutedTable permute(const Table& t, Axis axis, std::uint64_t seed) {
  std::size_t n = axis == Axis::kRows ? t.n_rows() : t.n_cols();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> headers;
  if (axis == Axis::kRows) {
    headers = t.headers();
    for (std::size_t i : perm) rows.push_back(t.raw_row(i));
  } else {
    for (std::size_t i : perm) headers.push_back(t.headers()[i]);
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
      std::vector<std::string> row;
      for (std::size_t i : perm) row.push_back(t.raw(r, i));
      rows.push_back(std::move(row));
    }
  }
  return {Table(t.table_id(), std::move(headers), rows), std::move(perm)};
}

Table inverse_permute(const Table& t, Axis axis, const std::vector<std::size_t>& permutation) {
  std::size_t n = axis == Axis::kRows ? t.n_rows() : t.n_cols();
  if (permutation.size() != n) throw Error(ErrorCode::kDimensionMismatch, "permutation length differs");
  std::vector<std::size_t> inverse(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (permutation[i] >= n || inverse[permutation[i]] != n) {
      throw Error(ErrorCode::kInvalidArgument, "not a permutation");
    }
    inverse[permutation[i]] = i;
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> headers;
  if (axis == Axis::kRows) {
    headers = t.headers();
    for (std::size_t i : inverse) rows.push_back(t.raw_row(i));
  } else {
    for (std::size_t i : inverse) headers.push_back(t.headers()[i]);
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
      std::vector<std::string> row;
      for (std::size_t i : inverse) row.push_back(t.raw(r, i));
      rows.push_back(std::move(row));
    }
  }
  return Table(t.table_id(), std::move(headers), rows);
}

Table rename_schema(const Table& t, RenameMode mode, const std::map<std::string, std::string>& synonyms) {
  std::vector<std::string> headers = t.headers();
  if (mode == RenameMode::kGeneric) {
    for (std::size_t i = 0; i < headers.size(); ++i) headers[i] = "col_" + std::to_string(i + 1);
  } else {
    for (const auto& [from, to] : synonyms) {
      if (std::find(headers.begin(), headers.end(), from) == headers.end()) {
        throw Error(ErrorCode::kUnknownHeader, "no header named '" + from + "'");
      }
    }
    std::vector<bool> renamed(headers.size(), false);
    for (std::size_t i = 0; i < headers.size(); ++i) {
      if (auto it = synonyms.find(headers[i]); it != synonyms.end()) {
        headers[i] = it->second;
        renamed[i] = true;
      }
    }
    for (std::size_t i = 0; i < headers.size(); ++i) {
      if (!renamed[i]) continue;
      for (std::size_t j = 0; j < headers.size(); ++j) {
        if (j != i && headers[j] == headers[i]) {
          throw Error(ErrorCode::kDuplicateHeader, "renaming creates duplicate header '" + headers[i] + "'");
        }
      }
    }
  }
  return Table(t.table_id(), std::move(headers), t.raw_rows());
}

std::vector<EntityMention> find_mentions(std::string_view question, const Table& t) {
  const std::string lq = ascii_lower(question);
  const auto tokens = question_tokens(question);
  std::vector<EntityMention> candidates;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      std::string value = trim(t.raw(r, c));
      if (value.empty()) continue;
      if (parse_number(value)) {
        for (auto [b, e] : tokens) {
          if (question.substr(b, e - b) == value) candidates.push_back({b, e, r, c});
        }
        continue;
      }
      if (value.size() < 3) continue;
      std::string needle = ascii_lower(value);
      for (std::size_t pos = lq.find(needle); pos != std::string::npos; pos = lq.find(needle, pos + 1)) {
        if (on_word_boundary(lq, pos, pos + needle.size())) {
          candidates.push_back({pos, pos + needle.size(), r, c});
        }
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    std::size_t la = a.end - a.begin;
    std::size_t lb = b.end - b.begin;
    if (la != lb) return la > lb;
    return a.begin < b.begin;
  });
  std::vector<EntityMention> claimed;
  for (const auto& m : candidates) {
    bool overlaps = std::any_of(claimed.begin(), claimed.end(),
                                [&](const auto& o) { return m.begin < o.end && o.begin < m.end; });
    if (!overlaps) claimed.push_back(m);
  }
  std::sort(claimed.begin(), claimed.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
  return claimed;
}

PerturbedExample counterfactual_swap(const Example& ex, const Table& t, std::uint64_t seed) {
  const auto mentions = find_mentions(ex.question, t);
  if (mentions.empty()) throw Error(ErrorCode::kNoSwapPossible, "question mentions no cell value");
  std::vector<EntityMention> order = mentions;
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return (a.end - a.begin) > (b.end - b.begin);
  });
  for (const auto& m : order) {
    const std::string matched = ascii_lower(ex.question.substr(m.begin, m.end - m.begin));
    std::vector<std::string> alternatives;
    std::set<std::string> seen{matched};
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
      std::string value = trim(t.raw(r, m.col));
      if (value.empty() || !seen.insert(ascii_lower(value)).second) continue;
      alternatives.push_back(std::move(value));
    }
    if (alternatives.empty()) continue;
    Rng rng(seed);
    const std::string& replacement = alternatives[rng.uniform_index(alternatives.size())];
    std::string q;
    std::size_t cursor = 0;
    for (const auto& other : mentions) {
      if (ascii_lower(ex.question.substr(other.begin, other.end - other.begin)) != matched) continue;
      q.append(ex.question, cursor, other.begin - cursor);
      q += replacement;
      cursor = other.end;
    }
    q.append(ex.question, cursor, std::string::npos);
    auto out = make_result(ex, ProbeKind::kCounterfactualSwap, LabelClaim::kStress);
    out.example.question = std::move(q);
    return out;
  }
  throw Error(ErrorCode::kNoSwapPossible, "matched column has no second distinct value");
}

PerturbedExample entity_swap(const Example& ex, const Table& t, std::uint64_t) {
  const auto mentions = find_mentions(ex.question, t);
  if (mentions.size() < 2) throw Error(ErrorCode::kNoSwapPossible, "fewer than two entities in question");
  const auto& a = mentions[0];
  const std::string a_text = ex.question.substr(a.begin, a.end - a.begin);
  for (std::size_t i = 1; i < mentions.size(); ++i) {
    const auto& b = mentions[i];
    std::string b_text = ex.question.substr(b.begin, b.end - b.begin);
    if (ascii_lower(b_text) == ascii_lower(a_text)) continue;
    std::string q = ex.question.substr(0, a.begin) + b_text +
                    ex.question.substr(a.end, b.begin - a.end) + a_text + ex.question.substr(b.end);
    auto out = make_result(ex, ProbeKind::kEntitySwap, LabelClaim::kUnknown);
    out.example.question = std::move(q);
    return out;
  }
  throw Error(ErrorCode::kNoSwapPossible, "fewer than two distinct entities in question");
}

ParaphraseTemplate make_template(std::string pattern, std::string rewrite) {
  ParaphraseTemplate tpl;
  try {
    tpl.regex = std::regex(pattern, std::regex::extended | std::regex::icase);
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::kBadPattern, "bad pattern '" + pattern + "': " + e.what());
  }
  tpl.pattern = std::move(pattern);
  tpl.rewrite = std::move(rewrite);
  return tpl;
}

std::vector<ParaphraseTemplate> load_templates(const std::filesystem::path& path) {
  std::vector<ParaphraseTemplate> out;
  io::for_each_jsonl(path, [&](const io::json& j, std::size_t line) {
    try {
      out.push_back(make_template(io::require_string(j, "pattern"), io::require_string(j, "rewrite")));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kBadPattern) throw;
      throw Error(ErrorCode::kBadPattern, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

PerturbedExample paraphrase(const Example& ex, const std::vector<ParaphraseTemplate>& catalog,
                            std::uint64_t) {
  if (catalog.empty()) throw Error(ErrorCode::kInvalidArgument, "paraphrase catalog is empty");
  for (const auto& tpl : catalog) {
    if (!std::regex_search(ex.question, tpl.regex)) continue;
    auto out = make_result(ex, ProbeKind::kParaphrase, LabelClaim::kPreserving);
    out.example.question = std::regex_replace(
        ex.question, tpl.regex, tpl.rewrite, std::regex_constants::format_sed | std::regex_constants::format_first_only);
    return out;
  }
  throw Error(ErrorCode::kNoTemplateMatch, "no template matches question of '" + ex.id + "'");
}

PerturbedExample inject_canary(const Example& ex, const Table& t, const std::string& canary,
                               std::uint64_t seed) {
  if (canary.empty()) throw Error(ErrorCode::kInvalidArgument, "canary must be nonempty");
  auto collides = [&](const std::string& s) { return s.find(canary) != std::string::npos; };
  bool hit = collides(ex.question) || std::any_of(t.headers().begin(), t.headers().end(), collides);
  for (std::size_t r = 0; !hit && r < t.n_rows(); ++r) {
    for (std::size_t c = 0; !hit && c < t.n_cols(); ++c) hit = collides(t.raw(r, c));
  }
  if (hit) throw Error(ErrorCode::kCanaryCollision, "canary already present for '" + ex.id + "'");

  auto rows = t.raw_rows();
  auto headers = t.headers();
  if (headers.empty()) {
    headers.push_back("canary");
    for (auto& row : rows) row.emplace_back();
  }
  if (rows.empty()) {
    rows.emplace_back(headers.size());
    rows.back()[0] = canary;
  } else {
    Rng rng(seed);
    std::size_t r = rng.uniform_index(rows.size());
    std::size_t c = rng.uniform_index(headers.size());
    auto& cell = rows[r][c];
    cell = cell.empty() ? canary : cell + " " + canary;
  }
  auto out = make_result(ex, ProbeKind::kCanary, LabelClaim::kPreserving);
  out.example.table_id = perturbed_table_id(ex, ProbeKind::kCanary);
  out.table = Table(out.example.table_id, std::move(headers), rows);
  return out;
}

std::vector<std::string> detect_canary(const std::vector<std::pair<std::string, std::string>>& texts,
                                       std::string_view canary) {
  std::set<std::string> ids;
  if (canary.empty()) return {};
  for (const auto& [id, text] : texts) {
    if (text.find(canary) != std::string::npos) ids.insert(id);
  }
  return {ids.begin(), ids.end()};
}

std::vector<std::string> ngrams(std::string_view text, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "n-gram order must be >= 1");
  auto tokens = content_tokens(text);
  std::vector<std::string> out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string gram = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      gram.push_back('\x1f');
      gram += tokens[i + k];
    }
    out.push_back(std::move(gram));
  }
  return out;
}

NgramIndex::NgramIndex(std::size_t n) : n_(n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "n-gram order must be >= 1");
}

void NgramIndex::add(std::string_view document) {
  for (auto& g : ngrams(document, n_)) grams_.insert(std::move(g));
}

double ngram_overlap(std::string_view text, const NgramIndex& index) {
  auto grams = ngrams(text, index.n());
  if (grams.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& g : grams) hits += index.contains(g) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(grams.size());
}

DeltaReport probe_delta(const MetricBlock& before, const MetricBlock& after) {
  if (before.ids != after.ids) {
    throw Error(ErrorCode::kIdMismatch, "metric blocks cover different example ids");
  }
  DeltaReport report;
  report["em"] = {before.em, after.em, after.em - before.em};
  report["f1"] = {before.f1, after.f1, after.f1 - before.f1};
  return report;
}

std::string canary_for(const ProbeContext& ctx, std::string_view example_id) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(derive_seed(ctx.global_seed ^ 0xC0FFEEULL, example_id)));
  return ctx.canary_prefix + std::string(buf, 8);
}

PerturbedExample apply_probe(ProbeKind kind, const Example& ex, const Table& t, const ProbeContext& ctx) {
  const std::uint64_t seed = derive_seed(ctx.global_seed, ex.id);
  switch (kind) {
    case ProbeKind::kCanary:
      return inject_canary(ex, t, canary_for(ctx, ex.id), seed);
    case ProbeKind::kEntitySwap:
      return entity_swap(ex, t, seed);
    case ProbeKind::kParaphrase:
      if (!ctx.templates) throw Error(ErrorCode::kInvalidArgument, "paraphrase needs a template catalog");
      return paraphrase(ex, *ctx.templates, seed);
    case ProbeKind::kCounterfactualSwap:
      return counterfactual_swap(ex, t, seed);
    case ProbeKind::kRowPermute:
    case ProbeKind::kColPermute: {
      Axis axis = kind == ProbeKind::kRowPermute ? Axis::kRows : Axis::kCols;
      auto permuted = permute(t, axis, seed);
      auto out = make_result(ex, kind, LabelClaim::kPreserving);
      out.example.table_id = perturbed_table_id(ex, kind);
      out.table = permuted.table.with_id(out.example.table_id);
      out.permutation = std::move(permuted.permutation);
      return out;
    }
    case ProbeKind::kSchemaRename: {
      auto out = make_result(ex, kind, LabelClaim::kPreserving);
      out.example.table_id = perturbed_table_id(ex, kind);
      out.table = rename_schema(t, RenameMode::kGeneric).with_id(out.example.table_id);
      return out;
    }
    case ProbeKind::kNgramOverlap:
      break;
  }
  throw Error(ErrorCode::kInvalidArgument, "ngram_overlap is a scoring probe, not a transform");
}

}  // namespace glean
