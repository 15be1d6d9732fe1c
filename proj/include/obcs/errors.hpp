#pragma once

#include <stdexcept>
#include <string>

namespace obcs {

/// Invalid arguments or configuration. The CLI maps this to exit status 1.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative method failed to reach its tolerance. The CLI maps this to
/// exit status 2. `residual` holds the last measured progress quantity.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double residual, long iterations)
        : std::runtime_error(what + " (residual " + std::to_string(residual) +
                             " after " + std::to_string(iterations) + " iterations)"),
          residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    long iterations() const noexcept { return iterations_; }

private:
    double residual_;
    long iterations_;
};

/// Input for which the requested quantity is not unique (e.g. argmax of a
/// zero objective).
class DegenerateInputError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

}  // namespace obcs
