#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zsl {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or unreadable input: malformed files, missing keys, bad arguments.
/// The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A well-formed request that could not be computed (singular system,
/// non-finite gradient, ...). The CLI maps these to exit code 1.
class ComputeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class CatalogError : public InputError {
 public:
  using InputError::InputError;
};

/// Packed feature file errors, one variant per failure mode.
class FormatError : public InputError {
 public:
  enum class Kind { BadMagic, Truncated, LabelMismatch, TrailingBytes, NonFinite, BadLabel };

  FormatError(Kind kind, const std::string& what) : InputError(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class SingularSystemError : public ComputeError {
 public:
  using ComputeError::ComputeError;
};

}  // namespace zsl
