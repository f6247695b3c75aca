#include "glean/bundle.hpp"

#include <algorithm>
#include <set>

#include "glean/error.hpp"
#include "glean/governance.hpp"
#include "glean/io.hpp"
#include "glean/probes.hpp"
#include "glean/rng.hpp"

namespace glean {
namespace {

namespace fs = std::filesystem;
using io::json;

[[noreturn]] void duplicate(const fs::path& file, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kDuplicateId, file.string() + ":" + std::to_string(line) + ": duplicate " + what);
}

[[noreturn]] void dangling(const fs::path& file, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kDanglingReference, file.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<double> number_array(const json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string("'") + what + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw std::invalid_argument(std::string("'") + what + "' must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

const Example* DatasetBundle::find(const std::string& id) const {
  auto it = std::lower_bound(examples.begin(), examples.end(), id,
                             [](const Example& e, const std::string& k) { return e.id < k; });
  return it != examples.end() && it->id == id ? &*it : nullptr;
}

std::optional<std::string> derived_source(const std::string& id) {
  auto pos = id.rfind("::");
  if (pos == std::string::npos || pos == 0) return std::nullopt;
  std::string suffix = id.substr(pos + 2);
  try {
    parse_probe_kind(suffix);
  } catch (const Error&) {
    try {
      parse_contrast_kind(suffix);
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  return id.substr(0, pos);
}

DatasetBundle ingest(const BundlePaths& paths) {
  DatasetBundle b;
  io::for_each_jsonl(paths.tables, [&](const json& j, std::size_t line) {
    Table t = io::table_from_json(j);
    std::string id = t.table_id();
    if (!b.tables.emplace(id, std::move(t)).second) duplicate(paths.tables, line, "table_id '" + id + "'");
  });

  std::set<std::string> ids;
  io::for_each_jsonl(paths.examples, [&](const json& j, std::size_t line) {
    Example ex = io::example_from_json(j);
    ex.validate();
    if (!ids.insert(ex.id).second) duplicate(paths.examples, line, "example id '" + ex.id + "'");
    if (!b.tables.count(ex.table_id)) {
      dangling(paths.examples, line, "example '" + ex.id + "' references unknown table '" + ex.table_id + "'");
    }
    b.examples.push_back(std::move(ex));
  });
  std::sort(b.examples.begin(), b.examples.end(), [](const Example& a, const Example& c) { return a.id < c.id; });

  auto resolves = [&](const std::string& id) {
    if (b.find(id)) return true;
    auto src = derived_source(id);
    return src && b.find(*src) != nullptr;
  };
  auto require_example = [&](const fs::path& file, std::size_t line, const std::string& id) {
    if (!b.find(id)) dangling(file, line, "id '" + id + "' matches no example");
  };

  for (const auto& [tag, path] : paths.predictions) {
    auto& preds = b.predictions[tag];
    io::for_each_jsonl(path, [&](const json& j, std::size_t line) {
      std::string id = io::require_string(j, "id");
      const json& p = io::require(j, "prediction");
      std::string text;
      if (p.is_string()) {
        text = p.get<std::string>();
      } else if (p.is_number()) {
        text = p.dump();
      } else if (!p.is_null()) {
        throw std::invalid_argument("'prediction' must be a string");
      }
      if (!resolves(id)) dangling(path, line, "prediction id '" + id + "' matches no example");
      if (!preds.emplace(id, std::move(text)).second) duplicate(path, line, "prediction id '" + id + "'");
    });
  }

  if (paths.gold_sql) {
    const fs::path& path = *paths.gold_sql;
    io::for_each_jsonl(path, [&](const json& j, std::size_t line) {
      std::string id = io::require_string(j, "id");
      GoldSqlEntry e{io::require_string(j, "sql"), std::nullopt};
      if (j.contains("db_path") && !j.at("db_path").is_null()) {
        fs::path db = io::require_string(j, "db_path");
        e.db_path = db.is_absolute() ? db : fs::absolute(path).parent_path() / db;
      }
      require_example(path, line, id);
      if (!b.gold_sql.emplace(id, std::move(e)).second) duplicate(path, line, "gold SQL id '" + id + "'");
    });
  }
  for (auto& ex : b.examples) {
    if (auto it = b.gold_sql.find(ex.id); it != b.gold_sql.end()) {
      ex.gold_sql = it->second.sql;
    } else if (ex.gold_sql) {
      b.gold_sql.emplace(ex.id, GoldSqlEntry{*ex.gold_sql, std::nullopt});
    }
  }

  if (paths.embeddings) {
    const fs::path& path = *paths.embeddings;
    io::for_each_jsonl(path, [&](const json& j, std::size_t line) {
      std::string id = io::require_string(j, "id");
      EmbeddingTable e;
      e.model_tag = j.contains("model_tag") ? io::require_string(j, "model_tag") : std::string("dense");
      e.question_vec = number_array(io::require(j, "question_vec"), "question_vec");
      const json& rows = io::require(j, "row_vecs");
      if (!rows.is_array()) throw std::invalid_argument("'row_vecs' must be an array of arrays");
      for (const auto& r : rows) e.row_vecs.push_back(number_array(r, "row_vecs"));
      require_example(path, line, id);
      if (!b.embeddings.emplace(id, std::move(e)).second) duplicate(path, line, "embedding id '" + id + "'");
    });
  }

  for (const auto& [tag, path] : paths.classifier_scores) {
    auto& scores = b.classifier_scores[tag];
    io::for_each_jsonl(path, [&](const json& j, std::size_t line) {
      std::string id = io::require_string(j, "id");
      const json& s = io::require(j, "score");
      if (!s.is_number()) throw std::invalid_argument("'score' must be a number");
      require_example(path, line, id);
      if (!scores.emplace(id, s.get<double>()).second) duplicate(path, line, "score id '" + id + "'");
    });
  }

  for (const auto& [tag, path] : paths.row_scores) {
    auto& scores = b.row_scores[tag];
    io::for_each_jsonl(path, [&](const json& j, std::size_t line) {
      std::string id = io::require_string(j, "id");
      auto v = number_array(io::require(j, "scores"), "scores");
      require_example(path, line, id);
      if (!scores.emplace(id, std::move(v)).second) duplicate(path, line, "row-score id '" + id + "'");
    });
  }

  if (paths.judgments) {
    const fs::path& path = *paths.judgments;
    io::for_each_jsonl(path, [&](const json& j, std::size_t line) {
      AuditJudgment a;
      a.id = io::require_string(j, "id");
      const json& row = io::require(j, "row");
      if (!row.is_number_unsigned()) throw std::invalid_argument("'row' must be a nonnegative integer");
      a.row = row.get<std::size_t>();
      a.judgment = io::require_string(j, "judgment");
      if (a.judgment != "supported" && a.judgment != "not_supported" && a.judgment != "uncertain") {
        throw std::invalid_argument("'judgment' must be supported|not_supported|uncertain");
      }
      a.judge = io::require_string(j, "judge");
      require_example(path, line, a.id);
      b.judgments.push_back(std::move(a));
    });
  }
  return b;
}

BundlePaths write_bundle(const DatasetBundle& bundle, const fs::path& dir) {
  BundlePaths p;
  p.tables = dir / "tables.jsonl";
  p.examples = dir / "examples.jsonl";
  std::vector<json> rows;
  for (const auto& [_, t] : bundle.tables) rows.push_back(io::to_json(t));
  io::write_jsonl(p.tables, rows);
  rows.clear();
  for (const auto& ex : bundle.examples) rows.push_back(io::to_json(ex));
  io::write_jsonl(p.examples, rows);
  for (const auto& [tag, preds] : bundle.predictions) {
    rows.clear();
    for (const auto& [id, text] : preds) rows.push_back(json{{"id", id}, {"prediction", text}});
    p.predictions[tag] = dir / ("predictions." + tag + ".jsonl");
    io::write_jsonl(p.predictions[tag], rows);
  }
  if (!bundle.gold_sql.empty()) {
    rows.clear();
    for (const auto& [id, e] : bundle.gold_sql) {
      json j{{"id", id}, {"sql", e.sql}};
      if (e.db_path) j["db_path"] = e.db_path->string();
      rows.push_back(std::move(j));
    }
    p.gold_sql = dir / "gold_sql.jsonl";
    io::write_jsonl(*p.gold_sql, rows);
  }
  if (!bundle.embeddings.empty()) {
    rows.clear();
    for (const auto& [id, e] : bundle.embeddings) {
      rows.push_back(json{{"id", id}, {"model_tag", e.model_tag}, {"question_vec", e.question_vec},
                          {"row_vecs", e.row_vecs}});
    }
    p.embeddings = dir / "embeddings.jsonl";
    io::write_jsonl(*p.embeddings, rows);
  }
  for (const auto& [tag, scores] : bundle.classifier_scores) {
    rows.clear();
    for (const auto& [id, s] : scores) rows.push_back(json{{"id", id}, {"score", s}});
    p.classifier_scores[tag] = dir / ("scores." + tag + ".jsonl");
    io::write_jsonl(p.classifier_scores[tag], rows);
  }
  for (const auto& [tag, scores] : bundle.row_scores) {
    rows.clear();
    for (const auto& [id, s] : scores) rows.push_back(json{{"id", id}, {"scores", s}});
    p.row_scores[tag] = dir / ("row_scores." + tag + ".jsonl");
    io::write_jsonl(p.row_scores[tag], rows);
  }
  if (!bundle.judgments.empty()) {
    rows.clear();
    for (const auto& a : bundle.judgments) {
      rows.push_back(json{{"id", a.id}, {"row", a.row}, {"judgment", a.judgment}, {"judge", a.judge}});
    }
    p.judgments = dir / "judgments.jsonl";
    io::write_jsonl(*p.judgments, rows);
  }
  return p;
}

std::vector<Example> stratified_sample(const std::vector<Example>& examples, std::size_t per_label,
                                       std::uint64_t seed) {
  std::map<std::string, std::vector<const Example*>> groups;
  for (const auto& ex : examples) groups[ex.task == Task::kQa ? std::string("qa") : ex.label].push_back(&ex);
  std::vector<Example> out;
  for (auto& [label, members] : groups) {
    std::sort(members.begin(), members.end(), [](const Example* a, const Example* c) { return a->id < c->id; });
    Rng rng(derive_seed(seed, "stratum:" + label));
    rng.shuffle(members);
    for (std::size_t i = 0; i < std::min(per_label, members.size()); ++i) out.push_back(*members[i]);
  }
  std::sort(out.begin(), out.end(), [](const Example& a, const Example& c) { return a.id < c.id; });
  return out;
}

}  // namespace glean
