#pragma once

#include <stdexcept>
#include <string>

namespace swf {

/// Shapes of two operands disagree.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Structural parameters are inconsistent (block counts, flags, variants).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Malformed file or stream contents.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An operation was called in a state it does not accept.
struct PreconditionError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace swf
