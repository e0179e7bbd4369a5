#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ewfm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent configuration. `line` is 0 when the error is not
/// tied to a config file position.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0, std::string key = {})
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line), key_(std::move(key)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

class NumericalOverflow : public Error {
 public:
  NumericalOverflow(const std::string& what, std::size_t layer)
      : Error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

/// Two particles at zero separation.
class SingularConfiguration : public Error {
 public:
  using Error::Error;
};

class DegenerateBatch : public Error {
 public:
  using Error::Error;
};

/// Non-finite ODE state. `step` is the RK4 step index at which it appeared.
class OdeDivergence : public Error {
 public:
  OdeDivergence(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class BufferGenerationError : public Error {
 public:
  BufferGenerationError(const std::string& what, std::size_t step)
      : Error(what + " (first failure at ODE step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class TrainingAborted : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ewfm
