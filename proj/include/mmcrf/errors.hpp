#pragma once

#include <stdexcept>
#include <string>

namespace mmcrf {

// Malformed inputs: bad ids, shape mismatches, schema violations.
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite intermediates, diverged optimization. CLI exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace mmcrf
