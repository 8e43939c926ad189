#include "storyline/qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace storyline {

QpResult solve_convex_qp(const Eigen::MatrixXd& G, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
                         const Eigen::VectorXd& b, const Eigen::VectorXd& x0, int max_iterations) {
  const auto n = x0.size();
  const auto m = A.rows();
  if (max_iterations <= 0) max_iterations = static_cast<int>(50 * (n + m) + 100);

  QpResult res;
  res.x = x0;
  Eigen::VectorXd& x = res.x;
  std::vector<Eigen::Index> working;
  std::vector<char> in_working(static_cast<std::size_t>(m), 0);

  const double scale = 1.0 + G.cwiseAbs().maxCoeff() + (g.size() ? g.cwiseAbs().maxCoeff() : 0.0);
  const double step_tol = 1e-11;
  const double multiplier_tol = 1e-9 * scale;
  const double curvature_tol = 1e-9 * scale;

  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    const Eigen::VectorXd q = G * x + g;
    const auto w = static_cast<Eigen::Index>(working.size());

    Eigen::MatrixXd Z;
    Eigen::MatrixXd Aw(w, n);
    for (Eigen::Index k = 0; k < w; ++k) Aw.row(k) = A.row(working[static_cast<std::size_t>(k)]);
    if (w == 0) {
      Z = Eigen::MatrixXd::Identity(n, n);
    } else {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(Aw.transpose());
      const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
      Z = Q.rightCols(n - w);
    }

    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    if (Z.cols() > 0) {
      const Eigen::MatrixXd H = Z.transpose() * G * Z;
      const Eigen::VectorXd r = -(Z.transpose() * q);
      // Pseudo-inverse with an absolute cutoff: directions of zero curvature
      // (translations) must not pick up round-off sized eigenvalues.
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
      Eigen::VectorXd u = Eigen::VectorXd::Zero(H.rows());
      for (Eigen::Index k = 0; k < H.rows(); ++k) {
        const double lambda = es.eigenvalues()(k);
        if (lambda > curvature_tol) u += es.eigenvectors().col(k) * (es.eigenvectors().col(k).dot(r) / lambda);
      }
      p = Z * u;
    }

    if (p.norm() <= step_tol * (1.0 + x.norm())) {
      if (w == 0) {
        res.converged = true;
        break;
      }
      const Eigen::VectorXd lambda = Aw.transpose().completeOrthogonalDecomposition().solve(q);
      Eigen::Index drop = -1;
      double most_negative = -multiplier_tol;
      for (Eigen::Index k = 0; k < w; ++k) {
        if (lambda(k) < most_negative) {
          most_negative = lambda(k);
          drop = k;
        }
      }
      if (drop < 0) {
        res.converged = true;
        break;
      }
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = 0;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    Eigen::Index block = -1;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (in_working[static_cast<std::size_t>(k)]) continue;
      const double ap = A.row(k).dot(p);
      if (ap >= -1e-14 * (1.0 + p.norm())) continue;
      const double slack = std::max(0.0, A.row(k).dot(x) - b(k));
      const double step = slack / -ap;
      if (step < alpha) {
        alpha = step;
        block = k;
      }
    }
    x += alpha * p;
    if (block >= 0) {
      working.push_back(block);
      in_working[static_cast<std::size_t>(block)] = 1;
    }
  }
  res.objective = 0.5 * x.dot(G * x) + g.dot(x);
  return res;
}

}  // namespace storyline
