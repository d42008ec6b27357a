#pragma once

#include <stdexcept>
#include <string>

namespace protoed {

// Base error. `kind()` is a stable short tag used in the CLI's machine-readable
// error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error("parse", m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error("validation", m) {}
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& m) : Error("infeasible", m) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

class LeakageError : public Error {
 public:
  explicit LeakageError(const std::string& m) : Error("leakage", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace protoed
