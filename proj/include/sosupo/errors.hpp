#pragma once

#include <stdexcept>
#include <string>

namespace sosupo {

/// Operands live in different ambient dimensions.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An SOS program could not be assembled (basis does not cover the residual, bad degrees).
class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// f is not equivariant (or an observable/constraint is not invariant) under a group element.
class EquivarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CertificateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sosupo
