#pragma once

#include <stdexcept>
#include <string>

namespace pansharp {

// Violated precondition or shape contract at a library entry point.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Filesystem failure: open, read, write, rename.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed payload: bad magic, wrong version, truncation, shape disagreement.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite value where a finite one is required (e.g. diverged training).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pansharp
