#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace glean {

enum class ErrorCode {
  kInvalidArgument,
  kMalformedInput,
  kDuplicateHeader,
  kUnknownHeader,
  kNoSwapPossible,
  kNoTemplateMatch,
  kCanaryCollision,
  kIdMismatch,
  kDimensionMismatch,
  kRowSetMismatch,
  kEmptyEvidence,
  kNotSimple,
  kSqlSyntax,
  kUnknownColumn,
  kMissingOracle,
  kSingleClass,
  kDegenerateMarginals,
  kBadPattern,
  kSchemaError,
  kDanglingReference,
  kDuplicateId,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Base of every error the library throws. The code is stable and is what the
/// CLI and the per-example error ledger record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class MalformedInput : public Error {
 public:
  MalformedInput(std::string format, std::size_t line, const std::string& reason);

  const std::string& format() const noexcept { return format_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string format_;
  std::size_t line_;
};

class SqlSyntaxError : public Error {
 public:
  SqlSyntaxError(std::size_t offset, const std::string& reason);

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class SchemaError : public Error {
 public:
  SchemaError(std::string file, std::size_t line, const std::string& reason);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace glean
