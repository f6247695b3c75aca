#include "glean/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "glean/error.hpp"
#include "glean/serialization.hpp"

namespace glean {
namespace {

using TermCounts = std::unordered_map<std::string, double>;

TermCounts counts(const std::vector<std::string>& tokens) {
  TermCounts out;
  for (const auto& t : tokens) out[t] += 1.0;
  return out;
}

std::vector<std::string> distinct(const std::vector<std::string>& tokens) {
  std::set<std::string> s(tokens.begin(), tokens.end());
  return {s.begin(), s.end()};
}

double bm25_idf(double n_docs, double df) { return std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5)); }

std::unordered_map<std::string, double> document_frequency(const std::vector<TermCounts>& docs) {
  std::unordered_map<std::string, double> df;
  for (const auto& d : docs) {
    for (const auto& [term, _] : d) df[term] += 1.0;
  }
  return df;
}

double avg_length(const std::vector<std::size_t>& lens) {
  if (lens.empty()) return 0.0;
  double total = 0.0;
  for (auto l : lens) total += static_cast<double>(l);
  return total / static_cast<double>(lens.size());
}

double length_norm(double b, std::size_t len, double avg) {
  return avg > 0.0 ? 1.0 - b + b * static_cast<double>(len) / avg : 1.0;
}

Stratum summarize(const std::vector<const HitRecord*>& recs) {
  Stratum s;
  s.n = recs.size();
  if (recs.empty()) return s;
  double em = 0.0;
  double f1 = 0.0;
  for (const auto* r : recs) {
    em += r->em;
    f1 += r->f1;
  }
  s.em = em / static_cast<double>(recs.size());
  s.f1 = f1 / static_cast<double>(recs.size());
  return s;
}

}  // namespace

std::vector<RowDocument> build_row_docs(const Table& t) {
  std::vector<std::vector<std::string>> header_toks;
  std::vector<std::string> all_headers;
  for (const auto& h : t.headers()) {
    header_toks.push_back(content_tokens(h));
    all_headers.insert(all_headers.end(), header_toks.back().begin(), header_toks.back().end());
  }
  std::vector<RowDocument> docs;
  docs.reserve(t.n_rows());
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    RowDocument d;
    d.row_index = r;
    d.header_tokens = all_headers;
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      auto cell = content_tokens(t.raw(r, c));
      d.tokens.insert(d.tokens.end(), header_toks[c].begin(), header_toks[c].end());
      d.tokens.insert(d.tokens.end(), cell.begin(), cell.end());
      d.cell_tokens.insert(d.cell_tokens.end(), cell.begin(), cell.end());
      d.cells.push_back(std::move(cell));
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

Ranking ranking_from_scores(std::string retriever, const std::vector<double>& scores) {
  Ranking r;
  r.retriever = std::move(retriever);
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  for (auto i : r.order) r.scores.push_back(scores[i]);
  return r;
}

std::vector<double> bm25_scores(const std::vector<std::string>& query,
                                const std::vector<std::vector<std::string>>& docs, Bm25Params params) {
  std::vector<TermCounts> tf;
  std::vector<std::size_t> lens;
  for (const auto& d : docs) {
    tf.push_back(counts(d));
    lens.push_back(d.size());
  }
  auto df = document_frequency(tf);
  const double n = static_cast<double>(docs.size());
  const double avg = avg_length(lens);
  std::vector<double> scores(docs.size(), 0.0);
  for (const auto& term : distinct(query)) {
    auto it = df.find(term);
    if (it == df.end()) continue;
    const double idf = bm25_idf(n, it->second);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      auto f = tf[i].find(term);
      if (f == tf[i].end()) continue;
      double norm = length_norm(params.b, lens[i], avg);
      scores[i] += idf * f->second * (params.k1 + 1.0) / (f->second + params.k1 * norm);
    }
  }
  return scores;
}

std::vector<double> bm25f_scores(const std::vector<std::string>& query, const std::vector<RowDocument>& docs,
                                 Bm25fParams params) {
  std::vector<TermCounts> all;
  std::vector<TermCounts> head;
  std::vector<TermCounts> cell;
  std::vector<std::size_t> head_len;
  std::vector<std::size_t> cell_len;
  for (const auto& d : docs) {
    all.push_back(counts(d.tokens));
    head.push_back(counts(d.header_tokens));
    cell.push_back(counts(d.cell_tokens));
    head_len.push_back(d.header_tokens.size());
    cell_len.push_back(d.cell_tokens.size());
  }
  auto df = document_frequency(all);
  const double n = static_cast<double>(docs.size());
  const double head_avg = avg_length(head_len);
  const double cell_avg = avg_length(cell_len);
  std::vector<double> scores(docs.size(), 0.0);
  for (const auto& term : distinct(query)) {
    auto it = df.find(term);
    if (it == df.end()) continue;
    const double idf = bm25_idf(n, it->second);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      double tf_h = head[i].count(term) ? head[i].at(term) : 0.0;
      double tf_c = cell[i].count(term) ? cell[i].at(term) : 0.0;
      double pseudo = params.header_weight * tf_h / length_norm(params.b, head_len[i], head_avg) +
                      params.cell_weight * tf_c / length_norm(params.b, cell_len[i], cell_avg);
      if (pseudo > 0.0) scores[i] += idf * pseudo * (params.k1 + 1.0) / (params.k1 + pseudo);
    }
  }
  return scores;
}

std::vector<double> tfidf_scores(const std::vector<std::string>& query,
                                 const std::vector<std::vector<std::string>>& docs) {
  std::vector<TermCounts> tf;
  for (const auto& d : docs) tf.push_back(counts(d));
  auto df = document_frequency(tf);
  const double n = static_cast<double>(docs.size());
  auto idf = [&](const std::string& term) {
    auto it = df.find(term);
    double d = it == df.end() ? 0.0 : it->second;
    return std::log((n + 1.0) / (d + 1.0));
  };
  TermCounts q = counts(query);
  TermCounts qw;
  double q_norm = 0.0;
  for (const auto& [term, f] : q) {
    double w = std::log(1.0 + f) * idf(term);
    qw[term] = w;
    q_norm += w * w;
  }
  q_norm = std::sqrt(q_norm);
  std::vector<double> scores(docs.size(), 0.0);
  if (q_norm == 0.0) return scores;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double dot = 0.0;
    double d_norm = 0.0;
    for (const auto& [term, f] : tf[i]) {
      double w = std::log(1.0 + f) * idf(term);
      d_norm += w * w;
      if (auto it = qw.find(term); it != qw.end()) dot += w * it->second;
    }
    if (d_norm > 0.0) scores[i] = dot / (q_norm * std::sqrt(d_norm));
  }
  return scores;
}

std::vector<double> cell_bm25_scores(const std::vector<std::string>& query, const std::vector<RowDocument>& docs,
                                     Bm25Params params) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> owner;
  for (const auto& d : docs) {
    for (const auto& c : d.cells) {
      cells.push_back(c);
      owner.push_back(d.row_index);
    }
  }
  std::vector<double> scores(docs.size(), 0.0);
  if (cells.empty()) return scores;
  auto cell_scores = bm25_scores(query, cells, params);
  std::vector<bool> seen(docs.size(), false);
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < docs.size(); ++i) slot[docs[i].row_index] = i;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    std::size_t i = slot[owner[k]];
    scores[i] = seen[i] ? std::max(scores[i], cell_scores[k]) : cell_scores[k];
    seen[i] = true;
  }
  return scores;
}

std::string_view to_string(SparseKind k) {
  switch (k) {
    case SparseKind::kTfidf: return "tfidf";
    case SparseKind::kBm25: return "bm25";
    case SparseKind::kBm25f: return "bm25f";
    case SparseKind::kCellBm25: return "cell_bm25";
  }
  return "bm25";
}

SparseKind parse_sparse_kind(std::string_view name) {
  if (name == "tfidf") return SparseKind::kTfidf;
  if (name == "bm25") return SparseKind::kBm25;
  if (name == "bm25f") return SparseKind::kBm25f;
  if (name == "cell_bm25") return SparseKind::kCellBm25;
  throw Error(ErrorCode::kInvalidArgument, "unknown retriever '" + std::string(name) + "'");
}

Ranking rank(const std::vector<std::string>& query, const std::vector<RowDocument>& docs, SparseKind kind) {
  if (docs.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot rank an empty document list");
  std::vector<double> scores;
  switch (kind) {
    case SparseKind::kTfidf:
    case SparseKind::kBm25: {
      std::vector<std::vector<std::string>> plain;
      for (const auto& d : docs) plain.push_back(d.tokens);
      scores = kind == SparseKind::kBm25 ? bm25_scores(query, plain) : tfidf_scores(query, plain);
      break;
    }
    case SparseKind::kBm25f: scores = bm25f_scores(query, docs); break;
    case SparseKind::kCellBm25: scores = cell_bm25_scores(query, docs); break;
  }
  Ranking r = ranking_from_scores(std::string(to_string(kind)), scores);
  for (auto& i : r.order) i = docs[i].row_index;
  return r;
}

Ranking rank_dense(const EmbeddingTable& emb) {
  const std::size_t d = emb.question_vec.size();
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidArgument, "embedding has a non-finite entry");
      s += x * x;
    }
    return std::sqrt(s);
  };
  const double qn = norm(emb.question_vec);
  std::vector<double> scores;
  for (const auto& row : emb.row_vecs) {
    if (row.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "row vector of dimension " + std::to_string(row.size()) +
                                                     " against question dimension " + std::to_string(d));
    }
    const double rn = norm(row);
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += row[i] * emb.question_vec[i];
    scores.push_back(qn > 0.0 && rn > 0.0 ? dot / (qn * rn) : 0.0);
  }
  return ranking_from_scores("dense:" + emb.model_tag, scores);
}

Ranking fuse_hybrid(const Ranking& a, const Ranking& b, int k) {
  std::set<std::size_t> sa(a.order.begin(), a.order.end());
  std::set<std::size_t> sb(b.order.begin(), b.order.end());
  if (sa != sb || sa.size() != a.order.size() || sb.size() != b.order.size()) {
    throw Error(ErrorCode::kRowSetMismatch, "rankings cover different rows");
  }
  std::size_t n = sa.empty() ? 0 : *sa.rbegin() + 1;
  std::vector<double> score(n, 0.0);
  std::vector<bool> present(n, false);
  for (std::size_t i = 0; i < a.order.size(); ++i) {
    score[a.order[i]] += 1.0 / (k + static_cast<double>(i + 1));
    present[a.order[i]] = true;
  }
  for (std::size_t i = 0; i < b.order.size(); ++i) score[b.order[i]] += 1.0 / (k + static_cast<double>(i + 1));
  Ranking r;
  r.retriever = "rrf(" + a.retriever + "," + b.retriever + ")";
  for (std::size_t i = 0; i < n; ++i) {
    if (present[i]) r.order.push_back(i);
  }
  std::stable_sort(r.order.begin(), r.order.end(), [&](auto x, auto y) { return score[x] > score[y]; });
  for (auto i : r.order) r.scores.push_back(score[i]);
  return r;
}

Ranking rank_sql_gold(const std::vector<std::size_t>& evidence, std::size_t n_rows) {
  std::set<std::size_t> ev;
  for (auto e : evidence) {
    if (e >= n_rows) throw Error(ErrorCode::kInvalidArgument, "evidence row out of range");
    ev.insert(e);
  }
  Ranking r;
  r.retriever = "sql_gold";
  for (auto e : ev) {
    r.order.push_back(e);
    r.scores.push_back(1.0);
  }
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (!ev.count(i)) {
      r.order.push_back(i);
      r.scores.push_back(0.0);
    }
  }
  return r;
}

std::map<std::size_t, int> recall_at_k(const Ranking& r, const std::vector<std::size_t>& evidence,
                                       const std::vector<std::size_t>& ks) {
  if (evidence.empty()) throw Error(ErrorCode::kEmptyEvidence, "recall needs nonempty evidence");
  auto first = first_hit_rank(r, evidence);
  std::map<std::size_t, int> out;
  for (auto k : ks) out[k] = first && *first <= k ? 1 : 0;
  return out;
}

std::optional<std::size_t> first_hit_rank(const Ranking& r, const std::vector<std::size_t>& evidence) {
  std::set<std::size_t> ev(evidence.begin(), evidence.end());
  for (std::size_t i = 0; i < r.order.size(); ++i) {
    if (ev.count(r.order[i])) return i + 1;
  }
  return std::nullopt;
}

std::string truncate_to_tokens(std::string_view s, std::size_t n) {
  // Mirrors split_tokens: punctuation is a token by itself, other runs end at
  // whitespace or punctuation.
  auto is_ws = [](unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); };
  auto is_punct = [](unsigned char c) { return c < 0x80 && std::ispunct(c); };
  std::size_t seen = 0;
  std::size_t i = 0;
  std::size_t cut = 0;
  while (seen < n) {
    while (i < s.size() && is_ws(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    if (is_punct(static_cast<unsigned char>(s[i]))) {
      ++i;
    } else {
      while (i < s.size() && !is_ws(static_cast<unsigned char>(s[i])) &&
             !is_punct(static_cast<unsigned char>(s[i]))) {
        ++i;
      }
    }
    ++seen;
    cut = i;
  }
  return std::string(s.substr(0, cut));
}

PrunedContext budget_prune(const Table& t, const Ranking& r, const std::vector<std::string>& question_tokens,
                           const TokenBudget& budget) {
  budget.validate();
  PrunedContext out;
  std::set<std::size_t> ranked(r.order.begin(), r.order.end());
  if (ranked.size() != t.n_rows() || (!ranked.empty() && *ranked.rbegin() >= t.n_rows())) {
    throw Error(ErrorCode::kRowSetMismatch, "ranking does not cover the table's rows");
  }
  for (auto row : r.order) {
    std::size_t cost = count_tokens(markdown_row(t.raw_row(row)));
    if (out.row_tokens + cost > budget.max_table_tokens) {
      if (out.rows.empty()) {
        out.rows.push_back(row);
        out.row_tokens = cost;
        out.oversize = true;
      }
      break;
    }
    out.rows.push_back(row);
    out.row_tokens += cost;
  }

  const std::set<std::size_t> kept(out.rows.begin(), out.rows.end());
  std::vector<std::size_t> cols(t.n_cols());
  std::iota(cols.begin(), cols.end(), 0);
  if (t.n_cols() > budget.max_cols) {
    const TokenSet q(question_tokens.begin(), question_tokens.end());
    std::vector<double> overlap(t.n_cols());
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      TokenSet col = content_token_set(t.headers()[c]);
      for (auto row : kept) {
        for (auto& tok : content_tokens(t.raw(row, c))) col.insert(std::move(tok));
      }
      overlap[c] = jaccard(q, col);
    }
    std::stable_sort(cols.begin(), cols.end(), [&](auto a, auto b) { return overlap[a] > overlap[b]; });
    cols.resize(budget.max_cols);
    std::sort(cols.begin(), cols.end());
  }
  out.cols = cols;

  std::vector<std::string> headers;
  for (auto c : cols) headers.push_back(t.headers()[c]);
  out.context = markdown_row(headers) + "\n|";
  for (std::size_t i = 0; i < cols.size(); ++i) out.context += " --- |";
  out.context += "\n";
  for (auto row : kept) {
    std::vector<std::string> cells;
    for (auto c : cols) cells.push_back(t.raw(row, c));
    std::string line = markdown_row(cells);
    if (out.oversize) line = truncate_to_tokens(line, budget.max_table_tokens);
    out.context += line + "\n";
  }
  return out;
}

StrataReport hit_rank_stratify(const std::vector<HitRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no records to stratify");
  std::vector<const HitRecord*> hit1;
  std::vector<const HitRecord*> miss1;
  std::map<std::string, std::vector<const HitRecord*>> buckets;
  for (const char* name : {"1", "2", "3-5", "6-10", "miss"}) buckets[name];
  for (const auto& rec : records) {
    bool at1 = rec.hit_rank && *rec.hit_rank == 1;
    (at1 ? hit1 : miss1).push_back(&rec);
    std::string bucket = "miss";
    if (rec.hit_rank) {
      std::size_t h = *rec.hit_rank;
      bucket = h == 1 ? "1" : h == 2 ? "2" : h <= 5 ? "3-5" : h <= 10 ? "6-10" : "miss";
    }
    buckets[bucket].push_back(&rec);
  }
  StrataReport report;
  report.hit_at_1 = summarize(hit1);
  report.miss_at_1 = summarize(miss1);
  for (const auto& [name, recs] : buckets) report.buckets[name] = summarize(recs);
  return report;
}

}  // namespace glean
