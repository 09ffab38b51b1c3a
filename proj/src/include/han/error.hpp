#pragma once

#include <stdexcept>
#include <string>

namespace han {

// Base for all toolkit errors so callers can catch the whole family at once.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input files (JSONL corpus, CSV tables, embedding text files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input that violates a contract (duplicate ids,
// infeasible prevalences, shape mismatches, empty cohorts).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration (zero epochs, task without positives, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Corrupted artifacts: checksum mismatches, truncated tensor blobs.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Non-finite numbers escaping a numeric op.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API misuse (backward before forward, missing tape).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace han
