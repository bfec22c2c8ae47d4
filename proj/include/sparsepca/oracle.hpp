#pragma once

// Brute-force references for small instances. Nothing here depends on the
// solver or on Eigen's eigensolvers.

#include <vector>

#include <Eigen/Dense>

#include "sparsepca/types.hpp"

namespace sparsepca::oracle {

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations,
/// ascending.
std::vector<double> jacobi_eigenvalues(const Eigen::MatrixXd& a, double tol = 1e-15, int max_sweeps = 100);

/// Largest eigenvalue; closed form for orders 1 and 2, Jacobi otherwise.
double max_eigenvalue(const Eigen::MatrixXd& a);

struct CardSolution {
  double psi = 0.0;
  /// 0-based positions, ascending.
  std::vector<Index> support;
  /// Unit vector, zero off the support.
  Eigen::VectorXd x;
};

/// max over unit x of x^T Sigma x - lambda * card(x), by enumerating all
/// nonempty supports. Ties go to the smaller support, then the
/// lexicographically smaller one. Throws InfeasibleError for n > 20.
CardSolution brute_force_card(const Eigen::MatrixXd& sigma, double lambda);

/// max over a grid of unit xi in R^2 of sum_i ((a_i^T xi)^2 - lambda)_+,
/// where a_i are the columns of the 2 x n matrix `a`. Throws
/// InfeasibleError unless a has two rows and grid_points >= 360.
double xi_scan_psi(const Eigen::MatrixXd& a, double lambda, int grid_points = 10000);

}  // namespace sparsepca::oracle
