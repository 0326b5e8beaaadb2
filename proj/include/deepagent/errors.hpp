#pragma once

#include <stdexcept>
#include <string>

namespace deepagent {

// Exit codes used by the command line tool map onto these categories.
enum class ErrorKind { Usage = 1, Config = 1, Ingestion = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  virtual const char* category() const noexcept = 0;

 private:
  ErrorKind kind_;
};

/// Invalid shapes, widths or parameter ranges supplied at construction time.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
  const char* category() const noexcept override { return "config"; }
};

/// An operation was called out of order or with arguments violating its contract.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
  const char* category() const noexcept override { return "usage"; }
};

/// Malformed or missing input files.
class IngestionError : public Error {
 public:
  explicit IngestionError(const std::string& what) : Error(ErrorKind::Ingestion, what) {}
  const char* category() const noexcept override { return "ingestion"; }
};

/// Non-finite values during training or a failed numeric routine.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
  const char* category() const noexcept override { return "numeric"; }
};

/// Audio too short or otherwise unusable; callers fall back to the missing-audio default.
class FeatureExtractionError : public Error {
 public:
  explicit FeatureExtractionError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
  const char* category() const noexcept override { return "feature"; }
};

}  // namespace deepagent
