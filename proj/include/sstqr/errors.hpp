#pragma once

#include <stdexcept>
#include <string>

namespace sstqr {

// Error taxonomy. The CLI maps these onto exit codes: validation -> 1,
// data/format -> 2, numerical -> 3.

/// Bad argument or configuration (precondition violation).
class validation_error : public std::invalid_argument {
 public:
  explicit validation_error(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Input value outside the mathematical domain of an operation.
class domain_error : public std::domain_error {
 public:
  explicit domain_error(const std::string& msg) : std::domain_error(msg) {}
};

/// Operation not defined for this configuration (e.g. derivative of degree 0).
class unsupported_error : public std::logic_error {
 public:
  explicit unsupported_error(const std::string& msg) : std::logic_error(msg) {}
};

/// Numerically degenerate problem instance (e.g. flat quantile segment).
class degenerate_error : public std::runtime_error {
 public:
  explicit degenerate_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Evaluation failed at a valid-looking point (e.g. nonpositive density slope).
class evaluation_error : public std::runtime_error {
 public:
  explicit evaluation_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed external input (CSV structure, missing columns, bad numerics).
class format_error : public std::runtime_error {
 public:
  explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Persisted document fails invariants or is truncated/corrupt.
class integrity_error : public std::runtime_error {
 public:
  explicit integrity_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Persisted document has an unknown or incompatible schema version.
class incompatibility_error : public std::runtime_error {
 public:
  explicit incompatibility_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sstqr
