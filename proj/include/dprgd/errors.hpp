#pragma once

#include <stdexcept>
#include <string>

namespace dprgd {

/// Invalid geometric input: bad point, bad tangent vector, mismatched base.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// The logarithm map is not defined for the requested pair (antipodal points
/// on the sphere).
class LogUndefined : public DomainError {
public:
  using DomainError::DomainError;
};

/// Inconsistent optimizer or experiment configuration, detected before any
/// work is done.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An input file could not be opened.
class MissingFile : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string &what) {
  if (!cond)
    throw DomainError(what);
}

} // namespace dprgd
