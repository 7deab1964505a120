#pragma once

#include <span>

#include <Eigen/Dense>

namespace ame {

/// Solves (G + lambda * P) beta = rhs where G is a Gram matrix whose first
/// row/column belongs to an unpenalized intercept and P is the identity with
/// P(0,0) = 0. For lambda > 0 the system is positive definite and solved by
/// LDLT; at lambda = 0 a complete orthogonal decomposition yields the
/// minimum-norm solution when G is rank deficient.
Eigen::VectorXd solve_ridge_normal(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, double lambda);

/// Ridge regression with an unpenalized intercept. `x` excludes the intercept
/// column; the result is [intercept, slope_1, ..., slope_d].
Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& x, std::span<const double> y, double lambda);

}  // namespace ame
