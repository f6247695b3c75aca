#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glean {

enum class Task { kQa, kVerdict };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

/// One task instance: a question (qa) or statement (verdict) over a table.
struct Example {
  std::string id;
  Task task = Task::kQa;
  std::string question;
  std::vector<std::string> gold_answers;  // qa
  std::string label;                      // verdict: entailed | refuted | nei
  std::string table_id;
  std::optional<std::string> gold_sql;

  /// Throws Error(kInvalidArgument) when the task-specific gold is missing.
  void validate() const;

  bool operator==(const Example&) const = default;
};

}  // namespace glean
