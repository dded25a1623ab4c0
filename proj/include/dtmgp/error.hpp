#pragma once

#include <stdexcept>
#include <string>

namespace dtmgp {

// Base of every error the library throws. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes, dimensions or grid labels that do not fit together.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Singular local systems, failed factorizations, non-finite losses.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration documents or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed files. Carries the byte offset when known.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t byte_offset);
  explicit FormatError(const std::string& what);

  std::size_t byte_offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};

// Files that cannot be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dtmgp
