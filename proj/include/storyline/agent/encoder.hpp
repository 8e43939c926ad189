#pragma once

#include "storyline/layout.hpp"

#include <Eigen/Dense>

namespace storyline::agent {

// (current layout, target user layout, step index k).
struct AgentState {
  Layout current;
  Layout target;
  int k = 0;
};

struct StateGrid {
  int H = 100;
  Eigen::MatrixXd current;  // H x H, row = y, column = x
  Eigen::MatrixXd target;
  double step_fraction = 0.0;  // k / K

  // [current row-major, target row-major, k/K], length 2*H*H + 1.
  Eigen::VectorXd flatten() const;
};

inline int encoded_size(int H) { return 2 * H * H + 1; }

// Draws every character's polyline with unit intensity. Slot j maps to column
// j/(M-1)*(H-1), the layout's vertical extent maps to rows [0, H-1]. Cells are
// centered on integer coordinates; segments are traversed cell by cell,
// stepping diagonally when a segment passes exactly through a cell corner.
// Throws DegenerateLayout when nothing is active.
Eigen::MatrixXd rasterize(const Layout& layout, int H);

StateGrid encode_state(const AgentState& state, int H, int K);

}  // namespace storyline::agent
