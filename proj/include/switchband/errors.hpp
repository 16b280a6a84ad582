#pragma once

#include <stdexcept>
#include <string>

namespace switchband {

/// Precondition or argument-domain violation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure detected while running (loss of PSD, disagreement
/// between algebraically equivalent routes, degenerate estimates).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or invalid configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace switchband
