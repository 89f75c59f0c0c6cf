#pragma once

#include <stdexcept>

namespace sirep {

// Error categories map onto the CLI exit codes (2, 3, 4).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorruptModelError : public ModelError {
 public:
  using ModelError::ModelError;
};

class ModelVersionError : public ModelError {
 public:
  using ModelError::ModelError;
};

}  // namespace sirep
