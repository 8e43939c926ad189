#include "storyline/agent/encoder.hpp"

#include "storyline/errors.hpp"
#include "storyline/reward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace storyline::agent {

Eigen::VectorXd StateGrid::flatten() const {
  const Eigen::Index hh = static_cast<Eigen::Index>(H) * H;
  Eigen::VectorXd out(2 * hh + 1);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < H; ++c) {
      out(r * H + c) = current(r, c);
      out(hh + r * H + c) = target(r, c);
    }
  }
  out(2 * hh) = step_fraction;
  return out;
}

namespace {

int cell_of(double v) { return static_cast<int>(std::floor(v + 0.5)); }

void mark(Eigen::MatrixXd& g, int col, int row) {
  if (row >= 0 && row < g.rows() && col >= 0 && col < g.cols()) g(row, col) = 1.0;
}

void draw_segment(Eigen::MatrixXd& g, double x0, double y0, double x1, double y1) {
  int cx = cell_of(x0), cy = cell_of(y0);
  const int ex = cell_of(x1), ey = cell_of(y1);
  mark(g, cx, cy);
  const double dx = x1 - x0, dy = y1 - y0;
  const int sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  double tmx = sx != 0 ? ((cx + 0.5 * sx) - x0) / dx : inf;
  double tmy = sy != 0 ? ((cy + 0.5 * sy) - y0) / dy : inf;
  const double tdx = sx != 0 ? 1.0 / std::abs(dx) : inf;
  const double tdy = sy != 0 ? 1.0 / std::abs(dy) : inf;
  // Walk boundary crossings up to the far end; the end cell is marked by
  // rounding, like the start, even when the end sits on a cell edge.
  for (;;) {
    const double t = std::min(tmx, tmy);
    if (!(t < 1.0 - 1e-12)) break;
    if (std::abs(tmx - tmy) <= 1e-12) {
      cx += sx;
      cy += sy;
      tmx += tdx;
      tmy += tdy;
    } else if (tmx < tmy) {
      cx += sx;
      tmx += tdx;
    } else {
      cy += sy;
      tmy += tdy;
    }
    mark(g, cx, cy);
  }
  mark(g, ex, ey);
}

}  // namespace

Eigen::MatrixXd rasterize(const Layout& layout, int H) {
  if (H < 2) throw ValidationError("grid side must be at least 2");
  const std::size_t n = layout.num_characters();
  const std::size_t m = layout.num_slots();
  bool any = false;
  for (double y : layout.pos.data()) any = any || !std::isnan(y);
  if (!any) throw DegenerateLayout("layout has no active cells");
  const auto ny = normalized_positions(layout);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(H, H);
  const double span = H - 1.0;
  auto px = [&](std::size_t j) { return m > 1 ? static_cast<double>(j) / static_cast<double>(m - 1) * span : 0.0; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (std::isnan(ny(i, j))) continue;
      const double y = ny(i, j) * span;
      const bool next = j + 1 < m && !std::isnan(ny(i, j + 1));
      if (next) {
        draw_segment(g, px(j), y, px(j + 1), ny(i, j + 1) * span);
      } else {
        mark(g, cell_of(px(j)), cell_of(y));
      }
    }
  }
  return g;
}

StateGrid encode_state(const AgentState& state, int H, int K) {
  if (K < 1) throw ValidationError("episode length must be positive");
  StateGrid s;
  s.H = H;
  s.current = rasterize(state.current, H);
  s.target = rasterize(state.target, H);
  s.step_fraction = static_cast<double>(state.k) / K;
  return s;
}

}  // namespace storyline::agent
