#pragma once

#include <span>
#include <vector>

#include "geest/matrix.hpp"

namespace geest {

struct LinearModel {
    double intercept = 0.0;
    std::vector<double> coefficients;

    double predict(std::span<const double> x) const;
    std::vector<double> predict(const Matrix& x) const;
};

/// Least squares with an intercept via column-pivoted QR. Throws when
/// n <= p + 1 or the design has numerical rank below p + 1 (pivots under
/// 1e-10 times the largest one).
LinearModel fit_ols(const Matrix& x, std::span<const double> y);

} // namespace geest
