#pragma once

#include <stdexcept>
#include <string>

namespace lapace {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where a finite value is required.
class NumericError : public Error {
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

class ArtifactError : public Error {
 public:
  using Error::Error;
};

// A precondition about labels, recourse readiness or feasibility failed.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lapace
