#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace cgr {

// Base of every error raised by the library. `code()` is a stable
// machine-readable identifier used by the CLI's JSON error line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, std::string context = {})
      : std::runtime_error(message), code_(std::move(code)), context_(std::move(context)) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& context() const noexcept { return context_; }

  // Data errors map to CLI exit code 2; usage errors to 1.
  virtual bool is_usage_error() const noexcept { return false; }

 private:
  std::string code_;
  std::string context_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& reason)
      : Error("SyntaxError", "PENMAN syntax error at offset " + std::to_string(position) + ": " + reason),
        position_(position),
        reason_(reason) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t position_;
  std::string reason_;
};

class DegenerateSplit : public Error {
 public:
  explicit DegenerateSplit(std::size_t choice)
      : Error("DegenerateSplit", "hypothesis " + std::to_string(choice) + " has no answer-only nodes") {}
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("DimensionMismatch",
              "expected dimension " + std::to_string(expected) + ", got " + std::to_string(got)) {}
};

class UnknownFact : public Error {
 public:
  explicit UnknownFact(const std::string& id) : Error("UnknownFact", "unknown fact id '" + id + "'", id) {}
};

class MissingEmbedding : public Error {
 public:
  explicit MissingEmbedding(const std::string& id)
      : Error("MissingEmbedding", "no embedding for fact '" + id + "'", id) {}
};

class EmptyIndex : public Error {
 public:
  EmptyIndex() : Error("EmptyIndex", "vector index is empty") {}
};

class UnknownQuery : public Error {
 public:
  explicit UnknownQuery(const std::string& text)
      : Error("UnknownQuery", "no precomputed embedding for query text", text) {}
};

class UnknownQuestion : public Error {
 public:
  explicit UnknownQuestion(const std::string& id)
      : Error("UnknownQuestion", "unknown question id '" + id + "'", id) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string context = {})
      : Error("ConfigError", message, std::move(context)) {}
  bool is_usage_error() const noexcept override { return true; }
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message, std::string context = {})
      : Error("DataError", message, std::move(context)) {}
};

}  // namespace cgr
