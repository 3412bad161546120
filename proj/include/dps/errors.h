// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_ERRORS_H_
#define DPS_ERRORS_H_

#include <stdexcept>
#include <string>

namespace dps {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition (shape or length mismatch, bad config).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// A score provider cannot serve the requested operation (e.g. no JVP).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// External provider failed to start, died, or timed out.
class ProviderError : public Error {
 public:
  using Error::Error;
};

// External provider sent bytes that do not follow the wire protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Quantity could not be estimated from the given data.
class EstimationError : public Error {
 public:
  using Error::Error;
};

// Linear algebra failure (singular or indefinite system).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// File could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dps

#endif  // DPS_ERRORS_H_
