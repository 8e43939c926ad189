#include "storyline/compaction.hpp"

#include "storyline/constraint_system.hpp"
#include "storyline/errors.hpp"
#include "storyline/qp.hpp"

#include <algorithm>
#include <cmath>

namespace storyline {

double squared_wiggle(const PositionMatrix& pos) {
  double total = 0.0;
  for (std::size_t i = 0; i < pos.rows(); ++i) {
    for (std::size_t j = 1; j < pos.cols(); ++j) {
      const double a = pos(i, j - 1);
      const double b = pos(i, j);
      if (!std::isnan(a) && !std::isnan(b)) total += (b - a) * (b - a);
    }
  }
  return total;
}

PositionMatrix compute_positions(const StoryScript& script, const OrderMatrix& order, const AlignMatrix& align,
                                 const std::vector<CompactionConstraint>& constraints, const LayoutParams& params) {
  params.validate();
  const std::size_t n = order.rows();
  const std::size_t m = order.cols();
  if (n != script.num_characters() || m != script.num_slots() || !align.same_shape(order)) {
    throw DimensionMismatch("order/alignment matrices do not match the script");
  }
  PositionMatrix pos(n, m, kAbsentPosition);
  const PositionSystem sys = build_structural_system(script, order, constraints, params);
  if (sys.num_cells == 0) return pos;

  FeasibilityChecker checker(sys);
  for (const auto& eq : sys.equalities) checker.add_equality(eq);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j < m; ++j) {
      if (align(i, j) != 1) continue;
      if (order(i, j) == kAbsent || order(i, j - 1) == kAbsent) {
        throw InfeasibleConstraints("straightened segment on an inactive character",
                                    {"alignment(character=" + std::to_string(i) + ", slot=" + std::to_string(j) + ")"});
      }
      const auto eq = alignment_equality(sys, i, j);
      if (!checker.add_equality(eq)) {
        throw InfeasibleConstraints("straightened segments contradict the session gaps", {eq.source});
      }
    }
  }
  const auto sol = checker.solve();
  if (!sol.feasible) throw InfeasibleConstraints("layout constraints are infeasible", sol.conflict);

  const auto bodies = static_cast<Eigen::Index>(sol.body_position.size());
  auto cell_y = [&](int cell, const Eigen::VectorXd& t) {
    const auto c = static_cast<std::size_t>(cell);
    return t(sol.body_of[c]) + sol.offset[c];
  };

  // Objective: sum over transitions of (t_b - t_a + (o_b - o_a))^2.
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(bodies, bodies);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(bodies);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j < m; ++j) {
      const int ca = sys.cell_of(i, j - 1);
      const int cb = sys.cell_of(i, j);
      if (ca < 0 || cb < 0) continue;
      const int ba = sol.body_of[static_cast<std::size_t>(ca)];
      const int bb = sol.body_of[static_cast<std::size_t>(cb)];
      if (ba == bb) continue;
      const double c = sol.offset[static_cast<std::size_t>(cb)] - sol.offset[static_cast<std::size_t>(ca)];
      G(bb, bb) += 2.0;
      G(ba, ba) += 2.0;
      G(ba, bb) -= 2.0;
      G(bb, ba) -= 2.0;
      g(bb) += 2.0 * c;
      g(ba) -= 2.0 * c;
    }
  }

  std::vector<std::pair<Eigen::VectorXd, double>> rows;
  for (const auto& q : sys.inequalities) {
    const int ba = sol.body_of[static_cast<std::size_t>(q.a)];
    const int bb = sol.body_of[static_cast<std::size_t>(q.b)];
    if (ba == bb) continue;
    const double d = sol.offset[static_cast<std::size_t>(q.b)] - sol.offset[static_cast<std::size_t>(q.a)];
    Eigen::VectorXd r = Eigen::VectorXd::Zero(bodies);
    r(bb) = 1.0;
    r(ba) = -1.0;
    rows.emplace_back(r, q.lo - d);
    if (std::isfinite(q.hi)) rows.emplace_back(-r, d - q.hi);
  }
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), bodies);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    A.row(static_cast<Eigen::Index>(k)) = rows[k].first.transpose();
    b(static_cast<Eigen::Index>(k)) = rows[k].second;
  }
  Eigen::VectorXd x0(bodies);
  for (Eigen::Index k = 0; k < bodies; ++k) x0(k) = sol.body_position[static_cast<std::size_t>(k)];

  const auto qp = solve_convex_qp(G, g, A, b, x0);
  const Eigen::VectorXd& t = qp.x;

  double top = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < sys.num_cells; ++c) top = std::min(top, cell_y(static_cast<int>(c), t));
  for (std::size_t c = 0; c < sys.num_cells; ++c) {
    const auto [i, j] = sys.cells[c];
    pos(i, j) = cell_y(static_cast<int>(c), t) - top;
  }
  return pos;
}

}  // namespace storyline
