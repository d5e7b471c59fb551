#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fednam {

/// Tensor or vector dimensions do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data (CSV, model JSON) could not be read or does not match its schema.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file or directory could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value violates its documented range.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN/Inf appeared where only finite values are allowed.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model file was written with an incompatible schema version.
class SchemaVersionError : public std::runtime_error {
 public:
  SchemaVersionError(int expected, int found)
      : std::runtime_error("model schema_version mismatch: expected " + std::to_string(expected) +
                           ", found " + std::to_string(found)),
        expected_(expected),
        found_(found) {}
  int expected() const noexcept { return expected_; }
  int found() const noexcept { return found_; }

 private:
  int expected_;
  int found_;
};

/// Local training on one client failed (non-finite loss, rejected update).
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t client_id, const std::string& what)
      : std::runtime_error("client " + std::to_string(client_id) + ": " + what), client_id_(client_id) {}
  std::size_t client_id() const noexcept { return client_id_; }

 private:
  std::size_t client_id_;
};

}  // namespace fednam
