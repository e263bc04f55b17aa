#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ddrom {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NonFiniteState : Error {
  using Error::Error;
};
struct ParameterOutOfDomain : Error {
  using Error::Error;
};
struct SingularJacobian : Error {
  using Error::Error;
};
struct SingularDenominator : Error {
  using Error::Error;
};

/// Newton or SQP iteration budget exhausted; carries the residual-norm trace.
struct NonConvergence : Error {
  NonConvergence(const std::string& what, std::vector<double> history)
      : Error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

struct DegenerateSplit : Error {
  using Error::Error;
};
struct TestFunctionRankFailure : Error {
  using Error::Error;
};

struct ZeroSnapshots : Error {
  using Error::Error;
};
struct EmptyBoundaryBasis : Error {
  using Error::Error;
};

struct InsufficientBudget : Error {
  using Error::Error;
};
struct SampleRankFailure : Error {
  using Error::Error;
};
struct GappyRankDeficient : Error {
  using Error::Error;
};
struct ConsistencyViolation : Error {
  using Error::Error;
};

struct NonFiniteAssembly : Error {
  using Error::Error;
};
struct SingularSaddle : Error {
  using Error::Error;
};

/// Strict global reconstruction found neighboring subdomains disagreeing on a port.
struct PortMismatch : Error {
  PortMismatch(const std::string& what, double discrepancy)
      : Error(what), max_discrepancy(discrepancy) {}
  double max_discrepancy = 0.0;
};

struct UnsupportedPortGeometry : Error {
  using Error::Error;
};
struct ZeroReference : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace ddrom
