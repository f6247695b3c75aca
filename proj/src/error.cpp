#include "glean/error.hpp"

namespace glean {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMalformedInput: return "MalformedInput";
    case ErrorCode::kDuplicateHeader: return "DuplicateHeader";
    case ErrorCode::kUnknownHeader: return "UnknownHeader";
    case ErrorCode::kNoSwapPossible: return "NoSwapPossible";
    case ErrorCode::kNoTemplateMatch: return "NoTemplateMatch";
    case ErrorCode::kCanaryCollision: return "CanaryCollision";
    case ErrorCode::kIdMismatch: return "IdMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kRowSetMismatch: return "RowSetMismatch";
    case ErrorCode::kEmptyEvidence: return "EmptyEvidence";
    case ErrorCode::kNotSimple: return "NotSimple";
    case ErrorCode::kSqlSyntax: return "SyntaxError";
    case ErrorCode::kUnknownColumn: return "UnknownColumn";
    case ErrorCode::kMissingOracle: return "MissingOracle";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kDegenerateMarginals: return "DegenerateMarginals";
    case ErrorCode::kBadPattern: return "BadPattern";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kDanglingReference: return "DanglingReference";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

MalformedInput::MalformedInput(std::string format, std::size_t line, const std::string& reason)
    : Error(ErrorCode::kMalformedInput,
            format + " line " + std::to_string(line) + ": " + reason),
      format_(std::move(format)),
      line_(line) {}

SqlSyntaxError::SqlSyntaxError(std::size_t offset, const std::string& reason)
    : Error(ErrorCode::kSqlSyntax, "at offset " + std::to_string(offset) + ": " + reason),
      offset_(offset) {}

SchemaError::SchemaError(std::string file, std::size_t line, const std::string& reason)
    : Error(ErrorCode::kSchemaError, file + ":" + std::to_string(line) + ": " + reason),
      file_(std::move(file)),
      line_(line) {}

}  // namespace glean
