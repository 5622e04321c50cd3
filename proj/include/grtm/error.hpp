#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grtm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or violated precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. line() is 1-based, 0 when not tied to a line.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Model and corpus (or checkpoint and run) disagree.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace grtm
