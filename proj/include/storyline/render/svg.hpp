#pragma once

#include "storyline/agent/policy.hpp"
#include "storyline/layout.hpp"

#include <string>
#include <vector>

namespace storyline::render {

enum class Smoothing { kNone, kCubic };

struct RenderOptions {
  int width = 960;
  int height = 540;
  Smoothing smoothing = Smoothing::kCubic;
  std::vector<std::string> palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  bool show_labels = true;
  std::vector<std::string> labels;  // per character; "C<i>" when missing
  double line_width = 2.0;

  void validate() const;  // throws ValidationError
};

// Layout units to pixels: px = ox + (x - x0) * scale, py = oy + (y - y0) * scale.
// y grows downward, origin top-left, one scale for both axes. The content box
// spans a quarter slot beyond the first and last slot and one inner gap above
// and below the lines, centered in the canvas (minus a label column).
inline constexpr double kMargin = 16.0;       // px on every side
inline constexpr double kLabelColumn = 90.0;  // px left of the lines when labels are shown

struct Viewport {
  double scale = 1.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double ox = 0.0;
  double oy = 0.0;

  double px(double x) const { return ox + (x - x0) * scale; }
  double py(double y) const { return oy + (y - y0) * scale; }
};

Viewport fit_viewport(const std::vector<const Layout*>& layouts, const RenderOptions& options);

// Each active slot is a flat stretch of half a slot around its anchor
// (slot_x[j], y); consecutive stretches are joined by a straight segment when
// the line is straightened and by a cubic with horizontal tangents otherwise.
// Style marks split a character's path into runs.
std::string to_svg(const Layout& layout, const RenderOptions& options = {});
std::string to_svg(const Layout& layout, const RenderOptions& options, const Viewport& viewport);

// One frame per snapshot, all sharing one viewport.
std::vector<std::string> render_sequence(const std::vector<Layout>& snapshots, const RenderOptions& options = {});
std::vector<std::string> render_sequence(const agent::Trajectory& trajectory, const RenderOptions& options = {});

}  // namespace storyline::render
