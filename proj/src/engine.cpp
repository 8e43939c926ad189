#include "storyline/engine.hpp"

#include "storyline/alignment.hpp"
#include "storyline/compaction.hpp"
#include "storyline/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace storyline {

Layout layout(const StoryScript& script, const std::vector<NarrativeConstraint>& constraints,
              const LayoutParams& params) {
  params.validate();
  const auto parts = partition(constraints);
  Layout out;
  out.params = params;
  out.order = compute_order(script, parts.ordering);
  out.align = compute_alignment(script, out.order, parts.alignment, params, parts.compaction);
  out.pos = compute_positions(script, out.order, out.align, parts.compaction, params);
  out.slot_x.resize(script.num_slots());
  for (std::size_t j = 0; j < out.slot_x.size(); ++j) out.slot_x[j] = static_cast<double>(j) * params.slot_width;
  return out;
}

std::int64_t count_crossings(const Layout& layout) { return total_crossings(layout.order); }

double count_wiggles(const Layout& layout) {
  double total = 0.0;
  const auto& pos = layout.pos;
  for (std::size_t i = 0; i < pos.rows(); ++i) {
    for (std::size_t j = 1; j < pos.cols(); ++j) {
      if (layout.active(i, j) && layout.active(i, j - 1)) total += std::abs(pos(i, j) - pos(i, j - 1));
    }
  }
  return total;
}

double measure_whitespace(const Layout& layout) {
  double total = 0.0;
  for (std::size_t j = 0; j < layout.num_slots(); ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < layout.num_characters(); ++i) {
      if (!layout.active(i, j)) continue;
      lo = std::min(lo, layout.pos(i, j));
      hi = std::max(hi, layout.pos(i, j));
    }
    if (hi >= lo) total += hi - lo;
  }
  return total;
}

std::vector<std::string> check_layout(const StoryScript& script, const Layout& layout,
                                      const std::vector<NarrativeConstraint>& constraints) {
  std::vector<std::string> issues;
  const std::size_t n = script.num_characters();
  const std::size_t m = script.num_slots();
  if (layout.order.rows() != n || layout.order.cols() != m || !layout.align.same_shape(layout.order) ||
      layout.pos.rows() != n || layout.pos.cols() != m || layout.slot_x.size() != m) {
    issues.push_back("matrix dimensions do not match the script");
    return issues;
  }
  const double tol = layout.params.position_tolerance;
  const auto table = session_table(script);
  auto at = [](std::size_t i, std::size_t j) { return "(" + std::to_string(i) + "," + std::to_string(j) + ")"; };

  for (std::size_t j = 0; j < m; ++j) {
    std::vector<std::size_t> ranked(n, n);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool active = table[i][j] >= 0;
      const int o = layout.order(i, j);
      const int e = layout.align(i, j);
      const double y = layout.pos(i, j);
      if (!active) {
        if (o != kAbsent || e != kAbsent || !std::isnan(y)) issues.push_back("inactive cell not absent at " + at(i, j));
        continue;
      }
      ++count;
      if (o < 0 || static_cast<std::size_t>(o) >= n || ranked[static_cast<std::size_t>(o)] != n) {
        issues.push_back("bad or duplicate rank at " + at(i, j));
      } else {
        ranked[static_cast<std::size_t>(o)] = i;
      }
      if (!std::isfinite(y)) issues.push_back("non-finite position at " + at(i, j));
      const bool prev = j > 0 && table[i][j - 1] >= 0;
      if (j == 0 && e != 1) issues.push_back("first-slot indicator not 1 at " + at(i, j));
      if (j > 0 && !prev && e != 0) issues.push_back("indicator must be 0 after an absence at " + at(i, j));
      if (e != 0 && e != 1) issues.push_back("indicator not binary at " + at(i, j));
      if (j > 0 && prev && e == 1 && !(std::abs(y - layout.pos(i, j - 1)) <= tol)) {
        issues.push_back("straightened segment moves at " + at(i, j));
      }
    }
    for (std::size_t r = 0; r < count; ++r) {
      if (ranked[r] == n) {
        issues.push_back("ranks at slot " + std::to_string(j) + " are not a permutation");
        break;
      }
    }
    if (!issues.empty()) continue;
    // C1 contiguity and gaps, C2 separation, order consistency with y.
    std::vector<int> seen(script.slots[j].size(), 0);
    for (std::size_t r = 0; r < count; ++r) {
      const auto u = ranked[r];
      const int s = table[u][j];
      if (r > 0) {
        const auto v = ranked[r - 1];
        const double gap = layout.pos(u, j) - layout.pos(v, j);
        if (table[v][j] == s) {
          if (!(std::abs(gap - layout.params.inner_gap) <= tol)) issues.push_back("inner gap violated at " + at(u, j));
        } else {
          if (!(gap >= layout.params.outer_gap - tol)) issues.push_back("outer gap violated at " + at(u, j));
          if (seen[static_cast<std::size_t>(s)]) issues.push_back("session split at " + at(u, j));
        }
      }
      seen[static_cast<std::size_t>(s)] = 1;
    }
  }

  for (const auto& c : constraints) {
    bool ok = true;
    if (const auto* o = std::get_if<OrderingConstraint>(&c)) {
      ok = o->slot < m && o->ahead >= 0 && o->behind >= 0 && static_cast<std::size_t>(o->ahead) < n &&
           static_cast<std::size_t>(o->behind) < n && layout.order(o->ahead, o->slot) != kAbsent &&
           layout.order(o->behind, o->slot) != kAbsent &&
           layout.order(o->ahead, o->slot) < layout.order(o->behind, o->slot);
    } else if (const auto* a = std::get_if<AlignmentConstraint>(&c)) {
      ok = a->slot < m && a->character >= 0 && static_cast<std::size_t>(a->character) < n;
      if (ok) {
        const int e = layout.align(a->character, a->slot);
        ok = a->value == 1 ? e == 1 : (e == 0 || e == kAbsent);
      }
    } else {
      const auto& k = std::get<CompactionConstraint>(c);
      ok = k.slot < m && k.first >= 0 && k.second >= 0 && static_cast<std::size_t>(k.first) < n &&
           static_cast<std::size_t>(k.second) < n;
      if (ok) {
        const double gap = std::abs(layout.pos(k.first, k.slot) - layout.pos(k.second, k.slot));
        ok = gap > k.d1 && gap < k.d2;
      }
    }
    if (!ok) issues.push_back("constraint not satisfied: " + describe(c));
  }
  return issues;
}

}  // namespace storyline
