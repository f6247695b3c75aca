#include "glean/synth.hpp"

#include <array>
#include <cstdio>
#include <set>

#include "glean/error.hpp"
#include "glean/rng.hpp"

namespace glean {
namespace {

constexpr std::array<const char*, 20> kFirst = {
    "alice", "bruno", "chen",  "dara",  "elena", "farid", "greta", "hugo",  "ines",  "jonas",
    "kiri",  "lena",  "marco", "nadia", "oscar", "priya", "quinn", "rosa",  "sven",  "tomas"};
constexpr std::array<const char*, 20> kLast = {
    "abbott", "brandt", "castro", "dubois", "eriksen", "fischer", "garcia", "horvat", "ivanova", "jensen",
    "kowalski", "lindqvist", "moreau", "novak", "okafor", "petrov", "quispe", "romano", "santos", "tanaka"};
constexpr std::array<const char*, 8> kTeams = {"harbor fc", "north united", "river city", "east rovers",
                                               "lake athletic", "stone town", "west wanderers", "hill rangers"};

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

}  // namespace

DatasetBundle synth_generate(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "synth_generate needs n >= 1");
  DatasetBundle b;
  auto& planted = b.predictions[kPlantedModel];
  for (std::size_t i = 0; i < n; ++i) {
    const std::string table_id = numbered("synth-t", i);
    Rng rng(derive_seed(seed, table_id));
    const std::size_t n_rows = 3 + rng.uniform_index(6);
    std::set<std::string> used;
    std::vector<std::vector<std::string>> rows;
    while (rows.size() < n_rows) {
      std::string name = capitalize(kFirst[rng.uniform_index(kFirst.size())]) + " " +
                         capitalize(kLast[rng.uniform_index(kLast.size())]);
      if (!used.insert(name).second) continue;
      rows.push_back({name, kTeams[rng.uniform_index(kTeams.size())], std::to_string(rng.uniform_index(100)),
                      std::to_string(1990 + rng.uniform_index(31))});
    }
    b.tables.emplace(table_id, Table(table_id, {"player", "team", "points", "year"}, rows));

    const auto& target = rows[rng.uniform_index(rows.size())];
    Example qa;
    qa.id = numbered("synth-q", i);
    qa.task = Task::kQa;
    qa.question = "how many points did " + target[0] + " score?";
    qa.gold_answers = {target[2]};
    qa.table_id = table_id;
    qa.gold_sql = "SELECT c3 FROM w WHERE c1 = '" + target[0] + "'";
    b.gold_sql.emplace(qa.id, GoldSqlEntry{*qa.gold_sql, std::nullopt});
    planted.emplace(qa.id, qa.gold_answers.front());
    b.examples.push_back(std::move(qa));

    const auto& claim = rows[rng.uniform_index(rows.size())];
    Example v;
    v.id = numbered("synth-v", i);
    v.task = Task::kVerdict;
    v.question = claim[0] + " scored " + claim[2] + " points for " + claim[1] + " in " + claim[3];
    v.label = rng.coin() ? "entailed" : "refuted";
    v.table_id = table_id;
    planted.emplace(v.id, v.label);
    b.examples.push_back(std::move(v));
  }
  std::sort(b.examples.begin(), b.examples.end(), [](const Example& a, const Example& c) { return a.id < c.id; });
  return b;
}

}  // namespace glean
