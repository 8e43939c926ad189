#include "storyline/render/svg.hpp"

#include "storyline/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

namespace storyline::render {

void RenderOptions::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("render dimensions must be positive");
  if (palette.empty()) throw ValidationError("palette must not be empty");
  if (!(line_width > 0.0)) throw ValidationError("line width must be positive");
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", std::abs(v) < 5e-4 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

double quarter(const Layout& l) { return l.params.slot_width / 4.0; }

}  // namespace

Viewport fit_viewport(const std::vector<const Layout*>& layouts, const RenderOptions& o) {
  o.validate();
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  double pad = 0.0;
  for (const Layout* l : layouts) {
    if (l->slot_x.empty()) continue;
    const double q = quarter(*l);
    xmin = std::min(xmin, l->slot_x.front() - q);
    xmax = std::max(xmax, l->slot_x.back() + q);
    pad = std::max(pad, l->params.inner_gap);
    for (std::size_t i = 0; i < l->num_characters(); ++i) {
      for (std::size_t j = 0; j < l->num_slots(); ++j) {
        if (!l->active(i, j)) continue;
        ymin = std::min(ymin, l->pos(i, j));
        ymax = std::max(ymax, l->pos(i, j));
      }
    }
  }
  Viewport v;
  if (!std::isfinite(xmin)) return v;
  if (!std::isfinite(ymin)) ymin = ymax = 0.0;
  ymin -= pad;
  ymax += pad;
  const double left = kMargin + (o.show_labels ? kLabelColumn : 0.0);
  const double avail_w = std::max(1.0, o.width - left - kMargin);
  const double avail_h = std::max(1.0, o.height - 2 * kMargin);
  const double cw = std::max(xmax - xmin, 1e-9);
  const double ch = std::max(ymax - ymin, 1e-9);
  v.scale = std::min(avail_w / cw, avail_h / ch);
  v.x0 = xmin;
  v.y0 = ymin;
  v.ox = left + (avail_w - cw * v.scale) / 2.0;
  v.oy = kMargin + (avail_h - ch * v.scale) / 2.0;
  return v;
}

namespace {

// A drawable stretch of one character: the flat part around slot j
// (transition = false) or the joint from slot j to j + 1.
struct Piece {
  std::size_t slot;
  bool transition;
};

struct Stroke {
  std::string color;
  double width = 0.0;
  std::optional<std::pair<double, double>> dash;
  std::optional<std::pair<double, double>> zigzag;  // amplitude, period (px)
  bool twined = false;

  bool operator==(const Stroke&) const = default;
};

bool covers(const StyleMark& m, CharacterId c, const Piece& p) {
  if (std::find(m.characters.begin(), m.characters.end(), c) == m.characters.end()) return false;
  const std::size_t last = p.transition ? p.slot + 1 : p.slot;
  return p.slot >= m.slot_begin && last <= m.slot_end;
}

class Drawer {
 public:
  Drawer(const Layout& l, const RenderOptions& o, const Viewport& v) : l_(l), o_(o), v_(v) {}

  // Base geometry of a piece in pixels, sampled as a function of x.
  double y_at(std::size_t i, const Piece& p, double x) const {
    if (!p.transition) return v_.py(l_.pos(i, p.slot));
    const double xa = v_.px(l_.slot_x[p.slot] + quarter(l_));
    const double xb = v_.px(l_.slot_x[p.slot + 1] - quarter(l_));
    const double ya = v_.py(l_.pos(i, p.slot));
    const double yb = v_.py(l_.pos(i, p.slot + 1));
    const double t = xb > xa ? std::clamp((x - xa) / (xb - xa), 0.0, 1.0) : 1.0;
    if (o_.smoothing == Smoothing::kNone || straight(i, p)) return ya + (yb - ya) * t;
    // Cubic with control points at mid-x: x(s) = xa + (xb - xa)(3s^2 - 2s^3)
    // is monotone, so invert it numerically.
    double lo = 0.0;
    double hi = 1.0;
    for (int k = 0; k < 60; ++k) {
      const double s = 0.5 * (lo + hi);
      (3 * s * s - 2 * s * s * s < t ? lo : hi) = s;
    }
    const double s = 0.5 * (lo + hi);
    return ya + (yb - ya) * (3 * s * s - 2 * s * s * s);
  }

  std::pair<double, double> x_range(const Piece& p) const {
    const double q = quarter(l_);
    if (!p.transition) return {v_.px(l_.slot_x[p.slot] - q), v_.px(l_.slot_x[p.slot] + q)};
    return {v_.px(l_.slot_x[p.slot] + q), v_.px(l_.slot_x[p.slot + 1] - q)};
  }

  bool straight(std::size_t i, const Piece& p) const {
    return l_.align(i, p.slot + 1) == 1 || l_.pos(i, p.slot) == l_.pos(i, p.slot + 1);
  }

  // Path commands continuing from the piece's start point.
  std::string commands(std::size_t i, const Piece& p, const Stroke& s, const std::vector<const StyleMark*>& twines) const {
    const auto [xa, xb] = x_range(p);
    std::string d;
    if (s.twined || s.zigzag) {
      const double step = s.zigzag ? s.zigzag->second / 4.0 : (xb - xa) / 16.0;
      const double anchor = v_.px(l_.slot_x[p.slot]);
      std::vector<double> xs;
      const double first = anchor + std::ceil((xa - anchor) / step) * step;
      for (double x = first; x < xb - 1e-9; x += step) {
        if (x > xa + 1e-9) xs.push_back(x);
      }
      xs.push_back(xb);
      for (double x : xs) d += " L" + num(x) + "," + num(styled_y(i, p, x, s, twines));
      return d;
    }
    if (!p.transition || straight(i, p) || o_.smoothing == Smoothing::kNone) {
      return " L" + num(xb) + "," + num(y_at(i, p, xb));
    }
    const double mid = 0.5 * (xa + xb);
    const double ya = y_at(i, p, xa);
    const double yb = y_at(i, p, xb);
    return " C" + num(mid) + "," + num(ya) + " " + num(mid) + "," + num(yb) + " " + num(xb) + "," + num(yb);
  }

  double styled_y(std::size_t i, const Piece& p, double x, const Stroke& s,
                  const std::vector<const StyleMark*>& twines) const {
    double y = y_at(i, p, x);
    const double anchor = v_.px(l_.slot_x[p.slot]);
    const double slot_px = l_.params.slot_width * v_.scale;
    if (s.twined) {
      for (const StyleMark* m : twines) {
        if (!covers(*m, static_cast<CharacterId>(i), p)) continue;
        double center = 0.0;
        for (CharacterId c : m->characters) center += y_at(static_cast<std::size_t>(c), p, x);
        center /= static_cast<double>(m->characters.size());
        y = center + (y - center) * std::cos(2.0 * std::numbers::pi * (x - anchor) / slot_px);
        break;
      }
    }
    if (s.zigzag) {
      const double t = (x - anchor) / s.zigzag->second;
      const double tri = 2.0 / std::numbers::pi * std::asin(std::sin(2.0 * std::numbers::pi * t));
      y += s.zigzag->first * tri;
    }
    return y;
  }

 private:
  const Layout& l_;
  const RenderOptions& o_;
  const Viewport& v_;
};

}  // namespace

std::string to_svg(const Layout& l, const RenderOptions& o) { return to_svg(l, o, fit_viewport({&l}, o)); }

std::string to_svg(const Layout& l, const RenderOptions& o, const Viewport& v) {
  o.validate();
  const std::size_t n = l.num_characters();
  const std::size_t m = l.num_slots();
  Drawer draw(l, o, v);
  std::vector<const StyleMark*> twines;
  for (const auto& s : l.styles) {
    if (s.kind == StyleKind::kTwined) twines.push_back(&s);
  }

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" version=\"1.1\" width=\""
      << o.width << "\" height=\"" << o.height << "\" viewBox=\"0 0 " << o.width << " " << o.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  // Merged groups: a translucent band along the group's centerline.
  for (const auto& s : l.styles) {
    if (s.kind != StyleKind::kMerged || s.characters.empty()) continue;
    std::string d;
    double spread = 0.0;
    for (std::size_t j = s.slot_begin; j <= s.slot_end && j < m; ++j) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      double sum = 0.0;
      std::size_t count = 0;
      for (CharacterId c : s.characters) {
        const auto ci = static_cast<std::size_t>(c);
        if (ci >= n || !l.active(ci, j)) continue;
        lo = std::min(lo, l.pos(ci, j));
        hi = std::max(hi, l.pos(ci, j));
        sum += l.pos(ci, j);
        ++count;
      }
      if (count == 0) continue;
      spread = std::max(spread, hi - lo);
      const double y = v.py(sum / static_cast<double>(count));
      d += (d.empty() ? "M" : " L") + num(v.px(l.slot_x[j] - quarter(l))) + "," + num(y) + " L" +
           num(v.px(l.slot_x[j] + quarter(l))) + "," + num(y);
    }
    if (d.empty()) continue;
    svg << "<path class=\"style-merged\" d=\"" << d << "\" fill=\"none\" stroke=\"#999999\" stroke-opacity=\"0.3\" "
        << "stroke-linecap=\"round\" stroke-linejoin=\"round\" stroke-width=\"" << num(spread * v.scale + 4 * o.line_width)
        << "\"/>\n";
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<CharacterId>(i);
    std::vector<Piece> pieces;
    for (std::size_t j = 0; j < m; ++j) {
      if (!l.active(i, j)) continue;
      pieces.push_back({j, false});
      if (j + 1 < m && l.active(i, j + 1)) pieces.push_back({j, true});
    }
    const Stroke base{o.palette[i % o.palette.size()], o.line_width, std::nullopt, std::nullopt, false};
    auto stroke_of = [&](const Piece& p) {
      Stroke s = base;
      for (const auto& mark : l.styles) {
        if (!covers(mark, c, p)) continue;
        switch (mark.kind) {
          case StyleKind::kDashed:
            s.dash = {mark.payload.value("dash", 6.0), mark.payload.value("gap", 4.0)};
            break;
          case StyleKind::kZigzag:
            s.zigzag = {mark.payload.value("amplitude", 3.0), mark.payload.value("period", 8.0)};
            break;
          case StyleKind::kColor: s.color = mark.payload.value("color", s.color); break;
          case StyleKind::kWidth: s.width = mark.payload.value("width", s.width); break;
          case StyleKind::kTwined: s.twined = true; break;
          default: break;
        }
      }
      return s;
    };

    std::size_t k = 0;
    while (k < pieces.size()) {
      const Stroke s = stroke_of(pieces[k]);
      const auto [xa, unused] = draw.x_range(pieces[k]);
      std::string d = "M" + num(xa) + "," + num(draw.styled_y(i, pieces[k], xa, s, twines));
      std::size_t e = k;
      for (; e < pieces.size(); ++e) {
        const bool contiguous = e == k || pieces[e].transition || pieces[e - 1].transition;
        if (!contiguous || !(stroke_of(pieces[e]) == s)) break;
        d += draw.commands(i, pieces[e], s, twines);
      }
      std::string cls = "character";
      if (s.dash) cls += " dashed";
      if (s.zigzag) cls += " zigzag";
      if (s.twined) cls += " twined";
      svg << "<path class=\"" << cls << "\" data-character=\"" << i << "\" d=\"" << d << "\" fill=\"none\" stroke=\""
          << escape(s.color) << "\" stroke-width=\"" << num(s.width) << "\" stroke-linecap=\"round\"";
      if (s.dash) svg << " stroke-dasharray=\"" << num(s.dash->first) << " " << num(s.dash->second) << "\"";
      svg << "/>\n";
      k = e;
    }

    if (o.show_labels && !pieces.empty()) {
      const std::size_t j = pieces.front().slot;
      const std::string label = i < o.labels.size() ? o.labels[i] : "C" + std::to_string(i);
      svg << "<text class=\"label\" x=\"" << num(v.px(l.slot_x[j] - quarter(l)) - 6) << "\" y=\""
          << num(v.py(l.pos(i, j)) + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
          << escape(base.color) << "\">" << escape(label) << "</text>\n";
    }
  }

  for (const auto& s : l.styles) {
    if (s.kind != StyleKind::kAnnotation || s.characters.empty()) continue;
    const auto ci = static_cast<std::size_t>(s.characters.front());
    if (ci >= n || s.slot_begin >= m || !l.active(ci, s.slot_begin)) continue;
    const double x = v.px(l.slot_x[s.slot_begin]) + s.payload.value("x", 0.0);
    const double y = v.py(l.pos(ci, s.slot_begin)) + s.payload.value("y", -8.0);
    svg << "<g class=\"style-annotation\" data-character=\"" << ci << "\">";
    if (s.payload.contains("icon")) {
      svg << "<image x=\"" << num(x - 8) << "\" y=\"" << num(y - 16) << "\" width=\"16\" height=\"16\" xlink:href=\""
          << escape(s.payload["icon"].get<std::string>()) << "\"/>";
    }
    if (s.payload.contains("text")) {
      svg << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          << "font-size=\"11\">" << escape(s.payload["text"].get<std::string>()) << "</text>";
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> render_sequence(const std::vector<Layout>& snapshots, const RenderOptions& o) {
  if (snapshots.empty()) throw ValidationError("nothing to render");
  std::vector<const Layout*> all;
  for (const auto& s : snapshots) all.push_back(&s);
  const Viewport v = fit_viewport(all, o);
  std::vector<std::string> frames;
  for (const auto& s : snapshots) frames.push_back(to_svg(s, o, v));
  return frames;
}

std::vector<std::string> render_sequence(const agent::Trajectory& t, const RenderOptions& o) {
  return render_sequence(t.snapshots, o);
}

}  // namespace storyline::render
