#include "glean/attribution.hpp"

#include <algorithm>

#include "glean/error.hpp"

namespace glean {
namespace {

struct Rule {
  std::string_view name;
  ErrorLabel label;
};

constexpr std::array<Rule, 8> kRules = {{
    {"r1_sql_exec_error", ErrorLabel::kL1},
    {"r2_oracle_match", ErrorLabel::kOk},
    {"r3_empty_prediction", ErrorLabel::kL0},
    {"r4_context_miss", ErrorLabel::kL0_5},
    {"r5_hallucination", ErrorLabel::kL2},
    {"r6_grounding_error", ErrorLabel::kL3},
    {"r7_calculation", ErrorLabel::kL4},
    {"r8_pred_grounded_gold_not", ErrorLabel::kL4},
}};

constexpr std::string_view kGoldFact = "fact_gold_grounded";
constexpr std::string_view kPredFact = "fact_pred_grounded";

std::string entry(std::string_view name, std::string_view outcome) {
  return std::string(name) + "=" + std::string(outcome);
}

std::string_view yes_no(bool b) { return b ? "yes" : "no"; }

bool grounded(std::string_view raw, const Table& t, const GroundingConfig& cfg) {
  NormalizedValue v = normalize(raw, cfg);
  return !v.text.empty() && table_contains(t, v, cfg);
}

bool oracle_match(std::string_view pred, const std::vector<std::string>& oracle, const GroundingConfig& cfg) {
  NormalizedValue p = normalize(pred, cfg);
  auto hit = [&](const std::string& o) { return values_match(p, normalize(o, cfg), cfg); };
  if (cfg.multivalue_policy == MultiValuePolicy::kAllElements) return std::all_of(oracle.begin(), oracle.end(), hit);
  return std::any_of(oracle.begin(), oracle.end(), hit);
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); });
}

[[noreturn]] void bad_trace(const std::string& why) { throw Error(ErrorCode::kMalformedInput, "rule trace: " + why); }

}  // namespace

std::string_view to_string(ErrorLabel l) {
  switch (l) {
    case ErrorLabel::kOk: return "OK";
    case ErrorLabel::kL0: return "L0";
    case ErrorLabel::kL0_5: return "L0_5";
    case ErrorLabel::kL1: return "L1";
    case ErrorLabel::kL2: return "L2";
    case ErrorLabel::kL3: return "L3";
    case ErrorLabel::kL4: return "L4";
  }
  return "OK";
}

ErrorLabel parse_error_label(std::string_view name) {
  for (auto l : kAllLabels) {
    if (to_string(l) == name) return l;
  }
  if (name == "L0.5") return ErrorLabel::kL0_5;
  throw Error(ErrorCode::kInvalidArgument, "unknown error label '" + std::string(name) + "'");
}

std::string_view to_string(OracleSource s) { return s == OracleSource::kSql ? "sql" : "gold_answer"; }

OracleSource parse_oracle_source(std::string_view name) {
  if (name == "sql") return OracleSource::kSql;
  if (name == "gold_answer") return OracleSource::kGoldAnswer;
  throw Error(ErrorCode::kInvalidArgument, "unknown oracle source '" + std::string(name) + "'");
}

AttributionRecord attribute(const AttributionInput& in, const Table& t, const GroundingConfig& ground_cfg,
                            const GroundingConfig& match_cfg) {
  const bool exec_error = in.sql_status == SqlStatus::kExecError;
  if (in.oracle.empty() && !exec_error) {
    throw Error(ErrorCode::kMissingOracle, "example '" + in.example_id + "' has no oracle answers");
  }
  AttributionRecord rec;
  rec.example_id = in.example_id;
  rec.oracle_source = in.oracle_source;
  auto& trace = rec.rule_trace;
  auto fire = [&](std::size_t i, bool fired) {
    trace.push_back(entry(kRules[i].name, yes_no(fired)));
    if (fired) rec.label = kRules[i].label;
    return fired;
  };

  if (fire(0, exec_error)) return rec;
  if (fire(1, oracle_match(in.prediction, in.oracle, match_cfg))) return rec;
  if (fire(2, is_blank(in.prediction))) return rec;
  if (!in.retrieval) {
    trace.push_back(entry(kRules[3].name, "n/a"));
  } else {
    const auto& ev = in.retrieval->evidence.rows;
    bool miss = !ev.empty() && std::none_of(ev.begin(), ev.end(), [&](std::size_t r) {
      return in.retrieval->survived.count(r) > 0;
    });
    if (fire(3, miss)) return rec;
  }

  auto gold_cell = [&](const std::string& o) { return grounded(o, t, ground_cfg); };
  const bool gold = ground_cfg.multivalue_policy == MultiValuePolicy::kAllElements
                        ? std::all_of(in.oracle.begin(), in.oracle.end(), gold_cell)
                        : std::any_of(in.oracle.begin(), in.oracle.end(), gold_cell);
  const bool pred = grounded(in.prediction, t, ground_cfg);
  trace.push_back(entry(kGoldFact, yes_no(gold)));
  trace.push_back(entry(kPredFact, yes_no(pred)));
  if (fire(4, gold && !pred)) return rec;
  if (fire(5, pred && gold)) return rec;
  if (fire(6, !pred && !gold)) return rec;
  fire(7, pred && !gold);
  return rec;
}

ErrorLabel replay(const std::vector<std::string>& rule_trace) {
  std::size_t pos = 0;
  auto next = [&](std::string_view name) -> std::string_view {
    if (pos >= rule_trace.size()) bad_trace("ends before " + std::string(name));
    std::string_view e = rule_trace[pos++];
    if (e.size() <= name.size() || e.substr(0, name.size()) != name || e[name.size()] != '=') {
      bad_trace("expected " + std::string(name) + ", got '" + std::string(e) + "'");
    }
    return e.substr(name.size() + 1);
  };
  auto as_bool = [&](std::string_view v, bool allow_na) -> std::optional<bool> {
    if (v == "yes") return true;
    if (v == "no") return false;
    if (allow_na && v == "n/a") return std::nullopt;
    bad_trace("bad outcome '" + std::string(v) + "'");
  };
  auto finish = [&](ErrorLabel l) {
    if (pos != rule_trace.size()) bad_trace("entries after the firing rule");
    return l;
  };

  for (std::size_t i = 0; i < 4; ++i) {
    auto v = as_bool(next(kRules[i].name), i == 3);
    if (v.value_or(false)) return finish(kRules[i].label);
  }
  const bool gold = *as_bool(next(kGoldFact), false);
  const bool pred = *as_bool(next(kPredFact), false);
  const std::array<bool, 4> expected = {gold && !pred, pred && gold, !pred && !gold, pred && !gold};
  for (std::size_t i = 4; i < 8; ++i) {
    bool v = *as_bool(next(kRules[i].name), false);
    if (v != expected[i - 4]) bad_trace(std::string(kRules[i].name) + " contradicts the grounding facts");
    if (v) return finish(kRules[i].label);
  }
  bad_trace("no rule fired");
}

LabelShares attribution_distribution(const std::vector<AttributionRecord>& records,
                                     const std::set<std::string>* subset) {
  std::map<ErrorLabel, std::size_t> counts;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (subset && !subset->count(r.example_id)) continue;
    ++counts[r.label];
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "attribution distribution over zero records");
  LabelShares shares;
  for (auto l : kAllLabels) shares[l] = static_cast<double>(counts[l]) / static_cast<double>(n);
  return shares;
}

SweepReport sensitivity_sweep(const std::vector<SweepCase>& cases, const std::vector<NamedConfig>& configs,
                              const GroundingConfig& match_cfg) {
  if (configs.size() < 2) throw Error(ErrorCode::kInvalidArgument, "sensitivity sweep needs at least two configs");
  SweepReport out;
  for (const auto& nc : configs) {
    std::vector<AttributionRecord> recs;
    recs.reserve(cases.size());
    for (const auto& c : cases) recs.push_back(attribute(c.input, *c.table, nc.cfg, match_cfg));
    out.per_config.emplace_back(nc.name, attribution_distribution(recs));
  }
  for (auto l : kAllLabels) {
    Band b{1.0, 0.0};
    for (const auto& [_, shares] : out.per_config) {
      b.lo = std::min(b.lo, shares.at(l));
      b.hi = std::max(b.hi, shares.at(l));
    }
    out.band[l] = b;
  }
  return out;
}

std::vector<NamedConfig> default_sweep_configs() {
  std::vector<NamedConfig> out;
  for (bool substring : {true, false}) {
    for (auto policy : {MultiValuePolicy::kAnyElement, MultiValuePolicy::kAllElements}) {
      GroundingConfig cfg;
      cfg.substring_text_match = substring;
      cfg.multivalue_policy = policy;
      out.push_back({std::string(substring ? "substring" : "exact_text") + "+" + std::string(to_string(policy)), cfg});
    }
  }
  return out;
}

}  // namespace glean
