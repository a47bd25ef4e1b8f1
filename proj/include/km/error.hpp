#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace km {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed formula, derivation file or algebra file.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A tree path does not exist in its host, or an occurrence set is inconsistent.
class InvalidPathError : public Error {
 public:
  using Error::Error;
};

class SearchLimitError : public Error {
 public:
  using Error::Error;
};

}  // namespace km
