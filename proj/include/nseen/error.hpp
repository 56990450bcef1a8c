/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nseen {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. Carries the 1-based line number (0 when the error
/// is not tied to a line, e.g. an empty file).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Binary artifact with wrong magic, unsupported version or truncated payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Binary artifact whose trailing checksum does not match its payload.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Vectors or artifacts that disagree on shape or model fingerprint.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during training (non-finite loss or gradient, zero
/// embedding in a cosine distance).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace nseen
