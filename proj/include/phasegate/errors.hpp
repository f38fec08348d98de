// Error taxonomy shared across the library.
//
// ConfigError: the requested setup is invalid or infeasible (bad keys, grids
// that cannot resolve the requested energy ceiling, ...) -> CLI exit code 2.
// NumericalError: a run started but the numerics broke down (norm drift,
// series that will not converge, non-monotonic optimization) -> exit code 3.
#pragma once

#include <stdexcept>

namespace phasegate {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace phasegate
