#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace distclass {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, violated preconditions, unusable input data.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. `offset` is the byte offset into `file` where
/// parsing stopped.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t offset, const std::string& what)
      : Error(file + ": byte " + std::to_string(offset) + ": " + what),
        file_(std::move(file)),
        offset_(offset) {}

  const std::string& file() const { return file_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string file_;
  std::size_t offset_;
};

/// A numerical routine broke down (overflow, no convergence where
/// convergence is required).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace distclass
