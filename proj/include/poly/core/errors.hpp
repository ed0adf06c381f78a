#pragma once

#include <stdexcept>
#include <string>

namespace poly {

/// Base of every exception the library throws. Execution failures of user
/// SQL are never exceptions; they travel as ExecutionOutcome values.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ConnectionError : public Error {
 public:
  using Error::Error;
};

class MigrationError : public Error {
 public:
  using Error::Error;
};

class UndefinedResult : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

// Infrastructure fault during a run (pool exhaustion, unreachable judge,
// refused evaluation). Distinct from per-example verdicts.
class RunError : public Error {
 public:
  using Error::Error;
};

}  // namespace poly
