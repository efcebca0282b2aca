#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deftrace {

// Exit-code family an error maps to at the CLI boundary.
enum class ErrorKind {
  Config,            // usage / configuration, exit 1
  Data,              // ingestion, alignment, quality, range, scenario, exit 2
  InsufficientData,  // record or window too short, exit 3
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string module, const std::string& what)
      : Error(ErrorKind::Config, std::move(module), what) {}
};

class IngestionError : public Error {
 public:
  IngestionError(std::string module, const std::string& what)
      : Error(ErrorKind::Data, std::move(module), what) {}
};

class AlignmentError : public Error {
 public:
  AlignmentError(std::string module, const std::string& what)
      : Error(ErrorKind::Data, std::move(module), what) {}
};

class DataQualityError : public Error {
 public:
  DataQualityError(std::string module, const std::string& what, std::size_t index)
      : Error(ErrorKind::Data, std::move(module), what + " at sample " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class RangeError : public Error {
 public:
  RangeError(std::string module, const std::string& what)
      : Error(ErrorKind::Data, std::move(module), what) {}
};

class ReferenceError : public Error {
 public:
  ReferenceError(std::string module, const std::string& what)
      : Error(ErrorKind::Data, std::move(module), what) {}
};

class ScenarioError : public Error {
 public:
  ScenarioError(std::string module, const std::string& what)
      : Error(ErrorKind::Data, std::move(module), what) {}
};

class InsufficientDataError : public Error {
 public:
  InsufficientDataError(std::string module, const std::string& what)
      : Error(ErrorKind::InsufficientData, std::move(module), what) {}
};

}  // namespace deftrace
