#pragma once

#include <stdexcept>
#include <string>

namespace apgpm {

// Any failure inside the modeling pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (CSV traces, manifests, model files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Missing or unreadable files.
class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid command-line arguments or configuration values.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace apgpm
