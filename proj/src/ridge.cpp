#include "ame/ridge.hpp"

#include <string>

#include "ame/error.hpp"

namespace ame {

Eigen::VectorXd solve_ridge_normal(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "ridge lambda must be non-negative");
  if (gram.rows() != gram.cols() || gram.rows() != rhs.size() || gram.rows() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "ridge system dimensions disagree");
  }
  if (lambda > 0.0) {
    Eigen::MatrixXd system = gram;
    system.diagonal().tail(system.rows() - 1).array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      Eigen::VectorXd beta = ldlt.solve(rhs);
      if (beta.allFinite()) return beta;
    }
    // Only reachable when the intercept column is all zero.
    return system.completeOrthogonalDecomposition().solve(rhs);
  }
  return gram.completeOrthogonalDecomposition().solve(rhs);
}

Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& x, std::span<const double> y, double lambda) {
  const Eigen::Index n = x.rows();
  if (n < 1 || static_cast<std::size_t>(n) != y.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "fit_ridge needs rows(X) == len(y) >= 1 (got " + std::to_string(n) + " and " +
                    std::to_string(y.size()) + ")");
  }
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = x;
  const Eigen::Map<const Eigen::VectorXd> target(y.data(), n);

  if (lambda == 0.0) {
    // Minimum-norm least squares straight from the design avoids squaring
    // its condition number.
    return design.completeOrthogonalDecomposition().solve(target);
  }
  const Eigen::MatrixXd gram = design.transpose() * design;
  return solve_ridge_normal(gram, design.transpose() * target, lambda);
}

}  // namespace ame
