#pragma once

#include <stdexcept>
#include <string>

namespace icqed {

// Malformed inputs: config files, CSV data, out-of-range physical values.
struct DataError : std::runtime_error {
    int line = 0;
    int column = 0;
    explicit DataError(const std::string& msg, int line_ = 0, int column_ = 0)
        : std::runtime_error(msg), line(line_), column(column_) {}
};

// Numerical failures: non-convergent quadrature, unstable integration.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Estimation failures: degenerate fits, flat signals, non-convergence
// that cannot be expressed as a FitResult.
struct EstimationError : NumericError {
    using NumericError::NumericError;
};

}  // namespace icqed
