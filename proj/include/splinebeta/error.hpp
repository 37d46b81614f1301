#pragma once

#include <stdexcept>
#include <string>

namespace splinebeta {

/// Machine-readable category attached to every library error. The CLI
/// serializes it into the error JSON it writes on failure.
enum class ErrorKind {
  InvalidArgument,
  OutOfRange,
  DegenerateMedRV,
  Singular,
  LeverageOne,
  NonConvergence,
  EmptyKeptSet,
  Parse,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a normal-equation system fails the reciprocal-condition gate.
class SingularError : public Error {
 public:
  SingularError(const std::string& what, double rcond)
      : Error(ErrorKind::Singular, what), rcond_(rcond) {}

  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

/// Raised when the group-LASSO inner solver hits its iteration cap.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double kkt_residual)
      : Error(ErrorKind::NonConvergence, what), kkt_residual_(kkt_residual) {}

  double kkt_residual() const noexcept { return kkt_residual_; }

 private:
  double kkt_residual_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace splinebeta
