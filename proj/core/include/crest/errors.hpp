#pragma once

#include <stdexcept>
#include <string>

namespace crest {

/// Base class for all estimator errors. The CLI maps subtrees of this
/// hierarchy onto process exit codes (config=1, data=2, numerical=3).
class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input/configuration problems (exit code 1 territory).
class ConfigError : public EstimatorError {
 public:
  using EstimatorError::EstimatorError;
};

/// Malformed or inconsistent data files (exit code 2 territory).
class DataError : public EstimatorError {
 public:
  using EstimatorError::EstimatorError;
};

/// Numerical failures inside the estimator (exit code 3 territory).
class NumericalError : public EstimatorError {
 public:
  using EstimatorError::EstimatorError;
};

// -- lie / state ------------------------------------------------------------

class AngleNearPi : public NumericalError {
 public:
  explicit AngleNearPi(double angle)
      : NumericalError("rotation angle " + std::to_string(angle) +
                       " rad is within 1e-6 of pi; unsupported configuration") {}
};

class IndexOutOfWindow : public DataError {
 public:
  using DataError::DataError;
};

// -- factors / interp -------------------------------------------------------

class TimestampOutsideInterval : public DataError {
 public:
  TimestampOutsideInterval(double tau, double ta, double tb)
      : DataError("timestamp " + std::to_string(tau) + " outside (" +
                  std::to_string(ta) + ", " + std::to_string(tb) + "]") {}
};

class OffGridSensor : public DataError {
 public:
  using DataError::DataError;
};

class MissingJointCovariance : public DataError {
 public:
  using DataError::DataError;
};

// -- solver / window --------------------------------------------------------

class SingularNoise : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotPositiveDefinite : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergedCost : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularHmm : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularCovariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonMonotonicTimestamp : public DataError {
 public:
  using DataError::DataError;
};

// -- io / metrics -----------------------------------------------------------

class IoError : public DataError {
 public:
  using DataError::DataError;
};

/// CSV schema violation; carries the 1-based line number.
class SchemaError : public DataError {
 public:
  SchemaError(const std::string& what, long line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class EmptyOverlap : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace crest
