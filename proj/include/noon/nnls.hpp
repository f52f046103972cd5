#pragma once

// Least squares over the probability simplex {x >= 0, sum x = 1}.

#include <vector>

#include <Eigen/Dense>

namespace noon {

struct SimplexLsOptions {
  int max_iterations = 2000;
  double kkt_tolerance = 1e-8;
};

struct SimplexLsResult {
  Eigen::VectorXd x;
  double residual = 0.0;  // ||A x - b||
  /// Largest violation of the optimality conditions, relative to ||A||^2.
  double kkt = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Primal active-set method.  The returned x always lies on the simplex.
/// A non-empty `warm` support starts the search from the uniform point on
/// those indices instead of the best vertex.
SimplexLsResult simplex_ls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           const SimplexLsOptions& opts = {},
                           const std::vector<int>& warm = {});

/// Euclidean projection onto the simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace noon
