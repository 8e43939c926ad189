#include "storyline/constraint_system.hpp"

#include "storyline/errors.hpp"

#include <algorithm>
#include <cmath>

namespace storyline {

double compaction_margin(const CompactionConstraint& c) { return 1e-4 * (c.d2 - c.d1); }

PositionSystem build_structural_system(const StoryScript& script, const OrderMatrix& order,
                                       const std::vector<CompactionConstraint>& compaction,
                                       const LayoutParams& params) {
  const std::size_t n = order.rows();
  const std::size_t m = order.cols();
  PositionSystem sys;
  sys.cell_of = Grid<int>(n, m, -1);
  const auto table = session_table(script);

  std::vector<std::vector<std::size_t>> ranked(m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (order(i, j) != kAbsent) ranked[j].push_back(i);
    }
    std::sort(ranked[j].begin(), ranked[j].end(),
              [&](std::size_t a, std::size_t b) { return order(a, j) < order(b, j); });
    for (std::size_t i : ranked[j]) {
      sys.cell_of(i, j) = static_cast<int>(sys.cells.size());
      sys.cells.emplace_back(i, j);
    }
  }
  sys.num_cells = sys.cells.size();

  for (std::size_t j = 0; j < m; ++j) {
    const auto& r = ranked[j];
    for (std::size_t k = 1; k < r.size(); ++k) {
      const auto u = r[k - 1];
      const auto v = r[k];
      const int a = sys.cell_of(u, j);
      const int b = sys.cell_of(v, j);
      const std::string where = " (" + std::to_string(u) + "," + std::to_string(v) + ") at slot " + std::to_string(j);
      if (table[u][j] == table[v][j]) {
        sys.equalities.push_back({a, b, params.inner_gap, "inner gap" + where});
      } else {
        sys.inequalities.push_back({a, b, params.outer_gap, kUnbounded, "outer gap" + where});
      }
    }
  }

  for (const auto& c : compaction) {
    if (c.slot >= m || c.first < 0 || c.second < 0 || static_cast<std::size_t>(c.first) >= n ||
        static_cast<std::size_t>(c.second) >= n || c.first == c.second) {
      throw ConstraintConflict("invalid compaction constraint: " + describe(c));
    }
    if (!(c.d1 >= 0.0) || !(c.d1 < c.d2)) throw ConstraintConflict("invalid compaction bounds: " + describe(c));
    const auto f = static_cast<std::size_t>(c.first);
    const auto s = static_cast<std::size_t>(c.second);
    if (order(f, c.slot) == kAbsent || order(s, c.slot) == kAbsent) {
      throw ConstraintConflict("compaction constraint names an inactive character: " + describe(c));
    }
    const bool first_above = order(f, c.slot) < order(s, c.slot);
    const int a = sys.cell_of(first_above ? f : s, c.slot);
    const int b = sys.cell_of(first_above ? s : f, c.slot);
    const double margin = compaction_margin(c);
    sys.inequalities.push_back({a, b, c.d1 + margin, c.d2 - margin, describe(c)});
  }
  return sys;
}

PositionSystem::Equality alignment_equality(const PositionSystem& system, std::size_t character,
                                            std::size_t slot) {
  return {system.cell_of(character, slot - 1), system.cell_of(character, slot), 0.0,
          "alignment(character=" + std::to_string(character) + ", slot=" + std::to_string(slot) + ")"};
}

FeasibilityChecker::FeasibilityChecker(const PositionSystem& system)
    : system_(&system), parent_(system.num_cells), to_parent_(system.num_cells, 0.0) {
  for (std::size_t v = 0; v < parent_.size(); ++v) parent_[v] = static_cast<int>(v);
}

int FeasibilityChecker::find(int v) const {
  const auto uv = static_cast<std::size_t>(v);
  const int p = parent_[uv];
  if (p == v) return v;
  const int root = find(p);
  to_parent_[uv] += to_parent_[static_cast<std::size_t>(p)];
  parent_[uv] = root;
  return root;
}

bool FeasibilityChecker::add_equality(const PositionSystem::Equality& eq) {
  const int ra = find(eq.a);
  const int rb = find(eq.b);
  const double oa = to_parent_[static_cast<std::size_t>(eq.a)];
  const double ob = to_parent_[static_cast<std::size_t>(eq.b)];
  if (ra == rb) {
    if (std::abs((ob - oa) - eq.offset) > tolerance_) return false;
    return true;
  }
  parent_[static_cast<std::size_t>(rb)] = ra;
  to_parent_[static_cast<std::size_t>(rb)] = oa + eq.offset - ob;
  rigid_sources_.push_back(eq.source);
  return true;
}

FeasibilityChecker::Solution FeasibilityChecker::solve() const {
  Solution sol;
  const std::size_t cells = system_->num_cells;
  sol.body_of.assign(cells, -1);
  sol.offset.assign(cells, 0.0);
  std::vector<int> body_of_root(cells, -1);
  int bodies = 0;
  for (std::size_t v = 0; v < cells; ++v) {
    const int r = find(static_cast<int>(v));
    auto& slot = body_of_root[static_cast<std::size_t>(r)];
    if (slot < 0) slot = bodies++;
    sol.body_of[v] = slot;
    sol.offset[v] = (r == static_cast<int>(v)) ? 0.0 : to_parent_[v];
  }

  struct Edge {
    int from;
    int to;
    double w;
    const std::string* source;
  };
  std::vector<Edge> edges;
  for (const auto& q : system_->inequalities) {
    const int ba = sol.body_of[static_cast<std::size_t>(q.a)];
    const int bb = sol.body_of[static_cast<std::size_t>(q.b)];
    const double d = sol.offset[static_cast<std::size_t>(q.b)] - sol.offset[static_cast<std::size_t>(q.a)];
    if (ba == bb) {
      if (d < q.lo - tolerance_ || d > q.hi + tolerance_) {
        sol.conflict = rigid_sources_;
        sol.conflict.push_back(q.source);
        return sol;
      }
      continue;
    }
    edges.push_back({bb, ba, d - q.lo, &q.source});
    if (std::isfinite(q.hi)) edges.push_back({ba, bb, q.hi - d, &q.source});
  }

  const auto nb = static_cast<std::size_t>(bodies);
  std::vector<double> dist(nb, 0.0);
  std::vector<int> pred(nb, -1);
  int last = -1;
  for (std::size_t iter = 0; iter <= nb; ++iter) {
    last = -1;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto& ed = edges[e];
      const double cand = dist[static_cast<std::size_t>(ed.from)] + ed.w;
      if (cand < dist[static_cast<std::size_t>(ed.to)] - tolerance_) {
        dist[static_cast<std::size_t>(ed.to)] = cand;
        pred[static_cast<std::size_t>(ed.to)] = static_cast<int>(e);
        last = ed.to;
      }
    }
    if (last < 0) break;
  }
  if (last >= 0) {
    // Walk back far enough to land on the cycle, then collect it.
    int v = last;
    for (std::size_t k = 0; k < nb; ++k) v = edges[static_cast<std::size_t>(pred[static_cast<std::size_t>(v)])].from;
    const int start = v;
    sol.conflict = rigid_sources_;
    do {
      const auto& ed = edges[static_cast<std::size_t>(pred[static_cast<std::size_t>(v)])];
      sol.conflict.push_back(*ed.source);
      v = ed.from;
    } while (v != start);
    return sol;
  }
  sol.feasible = true;
  sol.body_position = std::move(dist);
  return sol;
}

bool FeasibilityChecker::inequalities_feasible() const { return solve().feasible; }

}  // namespace storyline
