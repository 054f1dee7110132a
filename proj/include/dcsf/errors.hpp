#pragma once

#include <stdexcept>
#include <string>

namespace dcsf {

// Bad user input: malformed config, inconsistent sizes, values out of range.
struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Evaluation requested outside the mathematical domain of an operation
// (singular-point evaluation, inadmissible geodesic angle, ...).
struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

// A numerical routine cannot reach its accuracy contract (too few samples,
// vanishing signal, failed extrapolation).
struct accuracy_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace dcsf
