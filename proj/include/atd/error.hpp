#pragma once

#include <stdexcept>
#include <string>

namespace atd {

// Bad input data: malformed files, unknown keys, degenerate vectors.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated an operation's contract (dimension mismatch, bad config).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training produced a NaN/Inf; `group` names the first offending parameter group.
class NonFiniteError : public DataError {
 public:
  NonFiniteError(std::string group, const std::string& what)
      : DataError(what), group_(std::move(group)) {}
  const std::string& group() const { return group_; }

 private:
  std::string group_;
};

}  // namespace atd
