#include "glean/example.hpp"

#include "glean/error.hpp"

namespace glean {

std::string_view to_string(Task task) { return task == Task::kQa ? "qa" : "verdict"; }

Task parse_task(std::string_view name) {
  if (name == "qa") return Task::kQa;
  if (name == "verdict") return Task::kVerdict;
  throw Error(ErrorCode::kInvalidArgument, "unknown task '" + std::string(name) + "'");
}

void Example::validate() const {
  if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "example id must be nonempty");
  if (table_id.empty()) throw Error(ErrorCode::kInvalidArgument, "example '" + id + "' has no table_id");
  if (task == Task::kQa && gold_answers.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "qa example '" + id + "' has no gold answers");
  }
  if (task == Task::kVerdict && label != "entailed" && label != "refuted" && label != "nei") {
    throw Error(ErrorCode::kInvalidArgument,
                "verdict example '" + id + "' needs label entailed|refuted|nei");
  }
}

}  // namespace glean
