#pragma once

#include "storyline/layout.hpp"
#include "storyline/story.hpp"

#include <limits>
#include <string>
#include <vector>

namespace storyline {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

// Margin kept inside the open interval (d1, d2) of a compaction constraint.
double compaction_margin(const CompactionConstraint& c);

// Linear system over the active cells of a layout. Every relation is a
// difference y[b] - y[a] between two cells, which keeps feasibility a
// shortest-path question.
struct PositionSystem {
  struct Equality {
    int a = 0;
    int b = 0;
    double offset = 0.0;  // y[b] - y[a] == offset
    std::string source;
  };
  struct Inequality {
    int a = 0;
    int b = 0;
    double lo = 0.0;  // lo <= y[b] - y[a] <= hi
    double hi = kUnbounded;
    std::string source;
  };

  std::size_t num_cells = 0;
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // (character, slot)
  Grid<int> cell_of;                                       // -1 when absent
  std::vector<Equality> equalities;
  std::vector<Inequality> inequalities;
};

// Session gaps (equalities / outer-gap inequalities) and compaction bounds for
// a fixed order. Alignment equalities are added separately. Throws
// ConstraintConflict when a compaction constraint names inactive characters.
PositionSystem build_structural_system(const StoryScript& script, const OrderMatrix& order,
                                       const std::vector<CompactionConstraint>& compaction,
                                       const LayoutParams& params);

// Equality y[i][j] == y[i][j-1] for one straightened transition.
PositionSystem::Equality alignment_equality(const PositionSystem& system, std::size_t character,
                                            std::size_t slot);

// Union-find over cells with relative offsets, plus a Bellman-Ford check of the
// inequalities between the resulting rigid bodies. Copyable so callers can
// try an equality and roll back.
class FeasibilityChecker {
 public:
  explicit FeasibilityChecker(const PositionSystem& system);

  // False when the equality contradicts the rigid offsets already merged; the
  // checker is left unchanged in that case.
  bool add_equality(const PositionSystem::Equality& eq);

  // True when the inequalities admit a solution given the merged bodies.
  bool inequalities_feasible() const;

  struct Solution {
    bool feasible = false;
    std::vector<int> body_of;           // cell -> body index
    std::vector<double> offset;         // cell -> offset inside its body
    std::vector<double> body_position;  // feasible body translations when feasible
    std::vector<std::string> conflict;  // sources on a violated cycle
  };
  Solution solve() const;

  double tolerance() const noexcept { return tolerance_; }

 private:
  int find(int v) const;

  const PositionSystem* system_;
  mutable std::vector<int> parent_;
  mutable std::vector<double> to_parent_;  // y[v] - y[parent]
  std::vector<std::string> rigid_sources_;
  double tolerance_ = 1e-9;
};

}  // namespace storyline
