#pragma once

#include <Eigen/Dense>

namespace storyline {

struct QpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Primal active-set method for
//   minimize 1/2 x'Gx + g'x  subject to  A x >= b
// with G symmetric positive semidefinite and x0 feasible. Equality-constrained
// subproblems are solved in the null space of the working set with a
// rank-revealing factorization, so singular G (translation invariance) is
// handled; among optimal points the minimum-norm step is taken.
QpResult solve_convex_qp(const Eigen::MatrixXd& G, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
                         const Eigen::VectorXd& b, const Eigen::VectorXd& x0, int max_iterations = 0);

}  // namespace storyline
