#include "geest/linear.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "geest/error.hpp"

namespace geest {

double LinearModel::predict(std::span<const double> x) const {
    if (x.size() != coefficients.size())
        throw Error("linear model expects " + std::to_string(coefficients.size()) + " features, got " +
                    std::to_string(x.size()));
    double v = intercept;
    for (std::size_t j = 0; j < x.size(); ++j) v += coefficients[j] * x[j];
    return v;
}

std::vector<double> LinearModel::predict(const Matrix& x) const {
    if (x.cols() != coefficients.size())
        throw Error("linear model expects " + std::to_string(coefficients.size()) + " features, got " +
                    std::to_string(x.cols()));
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
    return out;
}

LinearModel fit_ols(const Matrix& x, std::span<const double> y) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (y.size() != n) throw Error("OLS: label length does not match row count");
    if (n <= p + 1) throw Error("OLS needs n > p + 1 (n=" + std::to_string(n) + ", p=" + std::to_string(p) + ")");

    Eigen::MatrixXd design(n, p + 1);
    Eigen::VectorXd rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        design(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t j = 0; j < p; ++j) design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = x(i, j);
        rhs(static_cast<Eigen::Index>(i)) = y[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    // Eigen's threshold is relative to the largest pivot, which for a
    // column-pivoted QR is the largest column norm.
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(p + 1))
        throw Error("OLS: design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(p + 1) + ")");
    Eigen::VectorXd beta = qr.solve(rhs);

    LinearModel m;
    m.intercept = beta(0);
    m.coefficients.resize(p);
    for (std::size_t j = 0; j < p; ++j) m.coefficients[j] = beta(static_cast<Eigen::Index>(j + 1));
    if (!std::isfinite(m.intercept)) throw Error("OLS produced non-finite parameters");
    for (double c : m.coefficients)
        if (!std::isfinite(c)) throw Error("OLS produced non-finite parameters");
    return m;
}

} // namespace geest
