#pragma once

#include <stdexcept>
#include <string>

namespace scl {

/// Failure categories; each maps to a distinct process exit code in the CLI.
enum class ErrorKind {
  usage = 1,       // bad arguments or missing inputs
  format = 2,      // malformed or inconsistent files
  degenerate = 3,  // zero-norm embeddings, degenerate regressions, too little data
  divergence = 4,  // non-finite loss during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

struct DegenerateError : Error {
  explicit DegenerateError(const std::string& what) : Error(ErrorKind::degenerate, what) {}
};

/// Regression or analysis requested with fewer points than it needs.
struct InsufficientDataError : DegenerateError {
  explicit InsufficientDataError(const std::string& what) : DegenerateError(what) {}
};

struct DivergenceError : Error {
  explicit DivergenceError(const std::string& what) : Error(ErrorKind::divergence, what) {}
};

}  // namespace scl
