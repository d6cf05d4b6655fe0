#pragma once

#include <stdexcept>
#include <string>

namespace imit {

// Raised when a computation produces or receives non-finite or otherwise
// numerically invalid data. CLI maps this to exit status 2.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised for bad arguments, unreadable files, malformed configs. Exit status 1.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw NumericalError(msg);
}

}  // namespace imit
