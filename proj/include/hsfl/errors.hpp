#pragma once

#include <stdexcept>
#include <string>

namespace hsfl {

// Status codes shared with the C API and the CLI exit codes.
enum class StatusCode : int {
  ok = 0,
  config_error = 2,
  infeasible = 3,
  non_convergence = 4,
  invalid_argument = 5,
  io_error = 6,
  internal = 7,
};

class Error : public std::runtime_error {
public:
  Error(StatusCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  StatusCode code() const { return code_; }

private:
  StatusCode code_;
};

class InvalidArgumentError : public Error {
public:
  explicit InvalidArgumentError(const std::string& what)
      : Error(StatusCode::invalid_argument, what) {}
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(StatusCode::config_error, what) {}
};

// Raised when a plan cannot satisfy the accuracy target; carries the numeric
// margin so callers can advise shrinking intervals or the learning rate.
class InfeasibleError : public Error {
public:
  InfeasibleError(const std::string& what, double margin)
      : Error(StatusCode::infeasible, what), margin_(margin) {}
  double margin() const { return margin_; }

private:
  double margin_ = 0.0;
};

class SolverError : public Error {
public:
  explicit SolverError(const std::string& what) : Error(StatusCode::non_convergence, what) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(StatusCode::io_error, what) {}
};

}  // namespace hsfl
