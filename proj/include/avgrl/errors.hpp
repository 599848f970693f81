#pragma once

#include <stdexcept>
#include <string>

namespace avgrl {

/// Thrown when an argument violates a documented precondition
/// (dimension mismatch, rank deficiency, malformed file, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative procedure ran out of its iteration budget.
/// `gap()` carries the last residual / duality gap reached.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double gap)
        : std::runtime_error(what), gap_(gap) {}
    double gap() const noexcept { return gap_; }

private:
    double gap_;
};

/// Harness configuration problems; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A NaN/inf appeared in an agent quantity; maps to CLI exit code 3.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace avgrl
