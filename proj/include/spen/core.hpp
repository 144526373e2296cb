#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spen {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error hierarchy. Every failure the library reports derives from Error so
// callers (the CLI in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values produced by a user or built-in function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid parameters, missing configuration, unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An oracle was asked for information it cannot provide.
class OracleKindError : public Error {
 public:
  using Error::Error;
};

// A convex subsolver hit its iteration cap before reaching tolerance.
class SubsolverError : public Error {
 public:
  SubsolverError(const std::string& what, double achieved_gap)
      : Error(what + " (achieved gap " + std::to_string(achieved_gap) + ")"),
        gap_(achieved_gap) {}
  double achieved_gap() const noexcept { return gap_; }

 private:
  double gap_;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

// Penalty steering could not satisfy its acceptance test.
class SteeringError : public Error {
 public:
  using Error::Error;
};

class CertificationError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace spen
