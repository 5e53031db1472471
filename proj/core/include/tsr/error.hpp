#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tsr {

/// Root of the library's exception hierarchy. Every error thrown by tsr
/// carries a short machine-readable kind next to the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Out-of-range or inconsistent parameters.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& message) : Error("parameter", message) {}
};

/// Dimension mismatch between vectors, matrices, caches or batches.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

/// Missing or inconsistent configuration (phrase banks, experiment files).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// CSV ingestion failure. `row` is the 1-based line number in the file, 0 when
/// the failure is not tied to a row.
class IngestError : public Error {
 public:
  IngestError(const std::string& message, std::size_t row = 0)
      : Error("ingest", row == 0 ? message : "row " + std::to_string(row) + ": " + message),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Corrupt, truncated or incompatible persisted file.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error("format", message) {}
};

/// Plain I/O failure (unreadable or unwritable path).
class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

/// Structurally invalid index construction (duplicate ids, bad norms).
class IndexError : public Error {
 public:
  explicit IndexError(const std::string& message) : Error("index", message) {}
};

/// Not enough data for the requested operation.
class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("data", message) {}
};

/// Text query with no in-vocabulary token; carries the unknown tokens.
class UnmatchableQueryError : public Error {
 public:
  explicit UnmatchableQueryError(std::vector<std::string> unknown_tokens)
      : Error("unmatchable", build_message(unknown_tokens)), tokens_(std::move(unknown_tokens)) {}

  const std::vector<std::string>& unknown_tokens() const noexcept { return tokens_; }

 private:
  static std::string build_message(const std::vector<std::string>& tokens) {
    std::string m = "query has no in-vocabulary tokens";
    if (!tokens.empty()) {
      m += " (unknown:";
      for (const auto& t : tokens) m += " " + t;
      m += ")";
    }
    return m;
  }

  std::vector<std::string> tokens_;
};

}  // namespace tsr
