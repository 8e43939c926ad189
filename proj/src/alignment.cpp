#include "storyline/alignment.hpp"

#include "storyline/constraint_system.hpp"
#include "storyline/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>

namespace storyline {

namespace {

constexpr double kForcedWeight = 1.0e6;

struct Range {
  double lo = 0.0;
  double hi = kUnbounded;
};

// Attainable gap between any two characters of one slot, built from the
// per-boundary ranges between rank-adjacent characters.
class SlotGaps {
 public:
  SlotGaps(const StoryScript& script, const OrderMatrix& order, std::size_t slot,
           const std::vector<CompactionConstraint>& compaction, const LayoutParams& params) {
    const auto table = session_table(script);
    std::vector<std::size_t> ranked;
    for (std::size_t i = 0; i < order.rows(); ++i) {
      if (order(i, slot) != kAbsent) ranked.push_back(i);
    }
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return order(a, slot) < order(b, slot); });
    lo_prefix_.assign(ranked.size(), 0.0);
    hi_prefix_.assign(ranked.size(), 0.0);
    unbounded_prefix_.assign(ranked.size(), 0);
    for (std::size_t k = 1; k < ranked.size(); ++k) {
      const auto u = ranked[k - 1];
      const auto v = ranked[k];
      Range r = table[u][slot] == table[v][slot] ? Range{params.inner_gap, params.inner_gap}
                                                 : Range{params.outer_gap, kUnbounded};
      for (const auto& c : compaction) {
        if (c.slot != slot) continue;
        const auto f = static_cast<std::size_t>(c.first);
        const auto s = static_cast<std::size_t>(c.second);
        if ((f == u && s == v) || (f == v && s == u)) {
          const double margin = compaction_margin(c);
          r.lo = std::max(r.lo, c.d1 + margin);
          r.hi = std::min(r.hi, c.d2 - margin);
        }
      }
      lo_prefix_[k] = lo_prefix_[k - 1] + r.lo;
      const bool open = !std::isfinite(r.hi);
      hi_prefix_[k] = hi_prefix_[k - 1] + (open ? 0.0 : r.hi);
      unbounded_prefix_[k] = unbounded_prefix_[k - 1] + (open ? 1 : 0);
    }
  }

  Range between(int rank_a, int rank_b) const {
    const auto a = static_cast<std::size_t>(std::min(rank_a, rank_b));
    const auto b = static_cast<std::size_t>(std::max(rank_a, rank_b));
    const bool open = unbounded_prefix_[b] > unbounded_prefix_[a];
    return {lo_prefix_[b] - lo_prefix_[a], open ? kUnbounded : hi_prefix_[b] - hi_prefix_[a]};
  }

 private:
  std::vector<double> lo_prefix_;
  std::vector<double> hi_prefix_;  // finite boundaries only
  std::vector<int> unbounded_prefix_;
};

struct Transition {
  std::size_t slot = 0;
  std::vector<std::size_t> seq;  // common characters in rank order at slot-1
  std::vector<char> forced_on;
  std::vector<char> forced_off;
  std::vector<std::vector<char>> edge_ok;  // edge_ok[a][b]: seq[a], seq[b] may be consecutive straight lines
};

bool ranges_meet(const Range& x, const Range& y) {
  constexpr double tol = 1e-9;
  return std::max(x.lo, y.lo) <= std::min(x.hi, y.hi) + tol;
}

Transition make_transition(const OrderMatrix& order, std::size_t j, const SlotGaps& prev, const SlotGaps& cur,
                           const Grid<int>& forced) {
  Transition t;
  t.slot = j;
  for (std::size_t i = 0; i < order.rows(); ++i) {
    if (order(i, j) != kAbsent && order(i, j - 1) != kAbsent) t.seq.push_back(i);
  }
  std::sort(t.seq.begin(), t.seq.end(), [&](std::size_t a, std::size_t b) { return order(a, j - 1) < order(b, j - 1); });
  const std::size_t k = t.seq.size();
  t.forced_on.assign(k, 0);
  t.forced_off.assign(k, 0);
  for (std::size_t p = 0; p < k; ++p) {
    t.forced_on[p] = forced(t.seq[p], j) == 1;
    t.forced_off[p] = forced(t.seq[p], j) == 0;
  }
  t.edge_ok.assign(k, std::vector<char>(k, 0));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const auto ca = t.seq[a];
      const auto cb = t.seq[b];
      if (order(ca, j) > order(cb, j)) continue;
      t.edge_ok[a][b] = ranges_meet(prev.between(order(ca, j - 1), order(cb, j - 1)),
                                    cur.between(order(ca, j), order(cb, j)));
    }
  }
  return t;
}

// All straightened subsets (bitmasks over seq) that satisfy the local rules.
std::vector<std::uint32_t> local_candidates(const Transition& t) {
  const std::size_t k = t.seq.size();
  std::vector<std::uint32_t> out;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    bool ok = true;
    int prev = -1;
    for (std::size_t p = 0; p < k && ok; ++p) {
      const bool on = (mask >> p) & 1u;
      if (on && t.forced_off[p]) ok = false;
      if (!on && t.forced_on[p]) ok = false;
      if (on) {
        if (prev >= 0 && !t.edge_ok[static_cast<std::size_t>(prev)][p]) ok = false;
        prev = static_cast<int>(p);
      }
    }
    if (ok) out.push_back(mask);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) > std::popcount(b); });
  return out;
}

std::vector<std::size_t> best_chain(const Transition& t) {
  const std::size_t k = t.seq.size();
  std::vector<double> best(k, 0.0);
  std::vector<int> pred(k, -1);
  for (std::size_t b = 0; b < k; ++b) {
    if (t.forced_off[b]) {
      best[b] = -1.0;
      continue;
    }
    const double w = t.forced_on[b] ? kForcedWeight : 1.0;
    best[b] = w;
    for (std::size_t a = 0; a < b; ++a) {
      if (best[a] < 0 || !t.edge_ok[a][b]) continue;
      if (best[a] + w > best[b]) {
        best[b] = best[a] + w;
        pred[b] = static_cast<int>(a);
      }
    }
  }
  int end = -1;
  for (std::size_t b = 0; b < k; ++b) {
    if (best[b] >= 0 && (end < 0 || best[b] > best[static_cast<std::size_t>(end)])) end = static_cast<int>(b);
  }
  std::vector<std::size_t> chain;
  for (int v = end; v >= 0; v = pred[static_cast<std::size_t>(v)]) chain.push_back(static_cast<std::size_t>(v));
  std::reverse(chain.begin(), chain.end());
  return chain;
}

bool apply_mask(FeasibilityChecker& checker, const PositionSystem& sys, const Transition& t, std::uint32_t mask) {
  for (std::size_t p = 0; p < t.seq.size(); ++p) {
    if (((mask >> p) & 1u) && !checker.add_equality(alignment_equality(sys, t.seq[p], t.slot))) return false;
  }
  return true;
}

FeasibilityChecker structural_checker(const PositionSystem& sys) {
  FeasibilityChecker checker(sys);
  for (const auto& eq : sys.equalities) checker.add_equality(eq);
  return checker;
}

}  // namespace

std::size_t straightened_count(const AlignMatrix& align) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < align.rows(); ++i) {
    for (std::size_t j = 1; j < align.cols(); ++j) count += align(i, j) == 1;
  }
  return count;
}

AlignMatrix compute_alignment(const StoryScript& script, const OrderMatrix& order,
                              const std::vector<AlignmentConstraint>& constraints, const LayoutParams& params,
                              const std::vector<CompactionConstraint>& compaction, const AlignmentLimits& limits) {
  params.validate();
  const std::size_t n = order.rows();
  const std::size_t m = order.cols();
  if (n != script.num_characters() || m != script.num_slots()) {
    throw DimensionMismatch("order matrix does not match the script");
  }

  Grid<int> forced(n, m, -1);
  for (const auto& c : constraints) {
    if (c.character < 0 || static_cast<std::size_t>(c.character) >= n || c.slot >= m ||
        (c.value != 0 && c.value != 1)) {
      throw ConstraintConflict("invalid alignment constraint: " + describe(c));
    }
    const auto i = static_cast<std::size_t>(c.character);
    auto& f = forced(i, c.slot);
    if (f >= 0 && f != c.value) throw ConstraintConflict("character forced both straight and bent: " + describe(c));
    if (c.slot == 0) {
      if (c.value == 0) throw ConstraintConflict("indicators at the first slot are always 1: " + describe(c));
      continue;
    }
    const bool both = order(i, c.slot) != kAbsent && order(i, c.slot - 1) != kAbsent;
    if (c.value == 1 && !both) throw ConstraintConflict("cannot straighten an inactive character: " + describe(c));
    if (both) f = c.value;
  }

  const PositionSystem sys = build_structural_system(script, order, compaction, params);
  std::vector<SlotGaps> gaps;
  gaps.reserve(m);
  for (std::size_t j = 0; j < m; ++j) gaps.emplace_back(script, order, j, compaction, params);
  std::vector<Transition> transitions;
  for (std::size_t j = 1; j < m; ++j) transitions.push_back(make_transition(order, j, gaps[j - 1], gaps[j], forced));

  AlignMatrix align(n, m, kAbsent);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (order(i, j) != kAbsent) align(i, j) = j == 0 ? 1 : 0;
    }
  }
  auto write_mask = [&](const Transition& t, std::uint32_t mask) {
    for (std::size_t p = 0; p < t.seq.size(); ++p) {
      if ((mask >> p) & 1u) align(t.seq[p], t.slot) = 1;
    }
  };

  bool exact = true;
  double combinations = 1.0;
  std::vector<std::vector<std::uint32_t>> candidates;
  for (const auto& t : transitions) {
    if (t.seq.size() > limits.max_exact_common) {
      exact = false;
      break;
    }
    candidates.push_back(local_candidates(t));
    if (candidates.back().empty()) throw ConstraintConflict("forced alignments are not realizable at slot " + std::to_string(t.slot));
    combinations *= static_cast<double>(candidates.back().size());
    if (combinations > limits.max_exact_combinations) {
      exact = false;
      break;
    }
  }

  if (exact) {
    const std::size_t count = transitions.size();
    std::vector<int> suffix(count + 1, 0);
    for (std::size_t t = count; t-- > 0;) suffix[t] = suffix[t + 1] + std::popcount(candidates[t].front());
    int best = -1;
    std::vector<std::uint32_t> chosen(count, 0);
    std::vector<std::uint32_t> best_choice;
    std::function<void(std::size_t, const FeasibilityChecker&, int)> search =
        [&](std::size_t t, const FeasibilityChecker& checker, int total) {
          if (t == count) {
            if (total > best) {
              best = total;
              best_choice = chosen;
            }
            return;
          }
          for (auto mask : candidates[t]) {
            if (total + std::popcount(mask) + suffix[t + 1] <= best) break;
            FeasibilityChecker next = checker;
            if (!apply_mask(next, sys, transitions[t], mask) || !next.inequalities_feasible()) continue;
            chosen[t] = mask;
            search(t + 1, next, total + std::popcount(mask));
          }
        };
    const FeasibilityChecker root = structural_checker(sys);
    if (!root.inequalities_feasible()) {
      throw InfeasibleConstraints("compaction constraints are infeasible", root.solve().conflict);
    }
    search(0, root, 0);
    if (best < 0) throw ConstraintConflict("forced alignments are jointly unrealizable");
    for (std::size_t t = 0; t < count; ++t) write_mask(transitions[t], best_choice[t]);
    return align;
  }

  // Large instances: exact chain per transition, then a greedy global repair
  // that keeps forced indicators and admits the rest in slot/rank order.
  std::vector<PositionSystem::Equality> forced_eqs;
  std::vector<std::pair<std::size_t, std::size_t>> optional;  // (character, slot)
  for (const auto& t : transitions) {
    const auto chain = best_chain(t);
    std::vector<char> in_chain(t.seq.size(), 0);
    for (auto p : chain) in_chain[p] = 1;
    for (std::size_t p = 0; p < t.seq.size(); ++p) {
      if (t.forced_on[p] && !in_chain[p]) {
        throw ConstraintConflict("forced alignments are not realizable at slot " + std::to_string(t.slot));
      }
    }
    for (auto p : chain) {
      if (t.forced_on[p]) {
        forced_eqs.push_back(alignment_equality(sys, t.seq[p], t.slot));
      } else {
        optional.emplace_back(t.seq[p], t.slot);
      }
    }
  }

  FeasibilityChecker checker = structural_checker(sys);
  for (const auto& eq : forced_eqs) {
    if (!checker.add_equality(eq)) throw ConstraintConflict("forced alignments are jointly unrealizable");
  }
  if (!checker.inequalities_feasible()) {
    const FeasibilityChecker bare = structural_checker(sys);
    if (!bare.inequalities_feasible()) {
      throw InfeasibleConstraints("compaction constraints are infeasible", bare.solve().conflict);
    }
    throw ConstraintConflict("forced alignments are jointly unrealizable");
  }
  FeasibilityChecker all = checker;
  bool everything = true;
  for (const auto& [i, j] : optional) {
    if (!all.add_equality(alignment_equality(sys, i, j))) {
      everything = false;
      break;
    }
  }
  if (everything && all.inequalities_feasible()) {
    checker = all;
    for (const auto& [i, j] : optional) align(i, j) = 1;
  } else {
    for (const auto& [i, j] : optional) {
      FeasibilityChecker trial = checker;
      if (trial.add_equality(alignment_equality(sys, i, j)) && trial.inequalities_feasible()) {
        checker = std::move(trial);
        align(i, j) = 1;
      }
    }
  }
  for (const auto& t : transitions) {
    for (std::size_t p = 0; p < t.seq.size(); ++p) {
      if (t.forced_on[p]) align(t.seq[p], t.slot) = 1;
    }
  }
  return align;
}

}  // namespace storyline
