#pragma once

#include <stdexcept>
#include <string>

namespace alphatron {

// Every failure raised by the library derives from `error`; the subclasses
// name the failure category so callers (and the CLI exit-code mapping) can
// dispatch on it.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad arguments: dimension mismatch, out-of-range parameter, non-Boolean point.
struct input_error : error {
    using error::error;
};

// A size or degree guard was exceeded (feature-map budget, degree cap, overflow).
struct capacity_error : error {
    using error::error;
};

// A polynomial construction failed its audit after all escalations.
struct construction_error : error {
    using error::error;
};

// Training produced a non-finite quantity.
struct divergence_error : error {
    using error::error;
    divergence_error(const std::string& what, int iteration)
        : error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_{iteration} {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_ = -1;
};

// The membership/distribution query budget was exhausted.
struct budget_error : error {
    using error::error;
};

// The requested quantity needs information the caller did not provide.
struct unsupported_error : error {
    using error::error;
};

// A concept produced an invalid conditional mean.
struct concept_error : error {
    using error::error;
};

// Rejection sampling could not find an admissible point.
struct infeasibility_error : error {
    using error::error;
};

}  // namespace alphatron
