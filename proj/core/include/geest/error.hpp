#pragma once

#include <stdexcept>
#include <string>

namespace geest {

/// Raised for every contract violation in the library (bad input, invalid
/// parameters, degenerate resampling configurations).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace geest
