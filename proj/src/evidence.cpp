#include "glean/evidence.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "glean/error.hpp"
#include "glean/metrics.hpp"

namespace glean {

std::string_view to_string(EvidenceMode m) {
  switch (m) {
    case EvidenceMode::kAnswerString: return "answer_string";
    case EvidenceMode::kSql: return "sql";
    case EvidenceMode::kHybrid: return "hybrid";
  }
  return "answer_string";
}

EvidenceMode parse_evidence_mode(std::string_view name) {
  if (name == "answer_string" || name == "answer") return EvidenceMode::kAnswerString;
  if (name == "sql") return EvidenceMode::kSql;
  if (name == "hybrid") return EvidenceMode::kHybrid;
  throw Error(ErrorCode::kInvalidArgument, "unknown evidence mode '" + std::string(name) + "'");
}

EvidenceSet detect_answer_rows(const Table& t, const std::vector<std::string>& gold,
                               const GroundingConfig& cfg) {
  EvidenceSet out;
  out.mode = EvidenceMode::kAnswerString;
  std::vector<NormalizedValue> targets;
  for (const auto& g : gold) {
    auto v = normalize(g, cfg);
    if (!v.text.empty()) targets.push_back(std::move(v));
  }
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    bool hit = false;
    for (std::size_t c = 0; c < t.n_cols() && !hit; ++c) {
      auto cell = normalized_cell(t, r, c, cfg);
      hit = std::any_of(targets.begin(), targets.end(), [&](const auto& v) { return values_match(cell, v, cfg); });
    }
    if (hit) out.rows.push_back(r);
  }
  return out;
}

EvidenceSet derive_sql_rows(const Table& t, const SqlQuery& q) {
  if (!classify_simple(q)) throw Error(ErrorCode::kNotSimple, "query is not simple: " + q.raw);
  auto eval = evaluate_where(t, q);
  EvidenceSet out;
  out.mode = EvidenceMode::kSql;
  out.rows = std::move(eval.rows);
  out.type_mismatches = eval.type_mismatches;
  return out;
}

EvidenceSet detect_hybrid(const Table& t, const Example& ex, const GroundingConfig& cfg, double theta) {
  EvidenceSet answer;
  if (ex.task == Task::kQa) answer = detect_answer_rows(t, ex.gold_answers, cfg);
  std::set<std::size_t> rows(answer.rows.begin(), answer.rows.end());
  const TokenSet question = content_token_set(ex.question);
  double best = -1.0;
  std::size_t best_row = 0;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    TokenSet row_tokens;
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      for (auto& tok : content_tokens(t.raw(r, c))) row_tokens.insert(std::move(tok));
    }
    double j = jaccard(question, row_tokens);
    if (j >= theta) rows.insert(r);
    if (j > best) {
      best = j;
      best_row = r;
    }
  }
  if (rows.empty() && t.n_rows() > 0) rows.insert(best_row);
  EvidenceSet out;
  out.mode = EvidenceMode::kHybrid;
  out.rows.assign(rows.begin(), rows.end());
  return out;
}

double evidence_coverage(const std::vector<EvidenceSet>& sets) {
  if (sets.empty()) throw Error(ErrorCode::kInvalidArgument, "coverage of an empty list");
  auto covered = std::count_if(sets.begin(), sets.end(), [](const auto& s) { return s.covered(); });
  return static_cast<double>(covered) / static_cast<double>(sets.size());
}

DetectorScore validate_detector(std::vector<IdEvidence> pred, std::vector<IdEvidence> gold) {
  auto by_id = [](const IdEvidence& a, const IdEvidence& b) { return a.id < b.id; };
  std::sort(pred.begin(), pred.end(), by_id);
  std::sort(gold.begin(), gold.end(), by_id);
  if (pred.size() != gold.size()) throw Error(ErrorCode::kIdMismatch, "detector outputs are not id-aligned");
  DetectorScore s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].id != gold[i].id) throw Error(ErrorCode::kIdMismatch, "id '" + pred[i].id + "' is not aligned");
    std::set<std::size_t> p(pred[i].evidence.rows.begin(), pred[i].evidence.rows.end());
    std::set<std::size_t> g(gold[i].evidence.rows.begin(), gold[i].evidence.rows.end());
    s.predicted += p.size();
    s.gold += g.size();
    for (auto r : p) s.true_positives += g.count(r);
  }
  s.precision = s.predicted == 0 ? 0.0 : static_cast<double>(s.true_positives) / static_cast<double>(s.predicted);
  s.recall = s.gold == 0 ? 0.0 : static_cast<double>(s.true_positives) / static_cast<double>(s.gold);
  return s;
}

double audit_kappa(const std::vector<AuditJudgment>& judgments, const std::string& judge_a,
                   const std::string& judge_b) {
  std::map<std::pair<std::string, std::size_t>, std::string> a;
  std::map<std::pair<std::string, std::size_t>, std::string> b;
  for (const auto& j : judgments) {
    if (j.judge == judge_a) a[{j.id, j.row}] = j.judgment;
    if (j.judge == judge_b) b[{j.id, j.row}] = j.judgment;
  }
  std::vector<std::string> la;
  std::vector<std::string> lb;
  for (const auto& [key, label] : a) {
    if (auto it = b.find(key); it != b.end()) {
      la.push_back(label);
      lb.push_back(it->second);
    }
  }
  if (la.empty()) throw Error(ErrorCode::kIdMismatch, "judges share no judged items");
  return cohen_kappa(la, lb);
}

}  // namespace glean
