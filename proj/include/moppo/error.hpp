#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace moppo {

/// Errors caused by malformed or inconsistent user input (files, flags,
/// requests). The CLI maps these to exit status 3.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : InputError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A reference to an id that does not exist.
class IntegrityError : public InputError {
 public:
  IntegrityError(std::string id, const std::string& what) : InputError(what), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class GeometryError : public InputError {
 public:
  using InputError::InputError;
};

/// A request that cannot be satisfied (utilization, balance, free area).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace moppo
