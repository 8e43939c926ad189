#include "storyline/ordering.hpp"

#include "storyline/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace storyline {

namespace {

struct Dag {
  std::size_t size = 0;
  std::vector<std::vector<int>> succ;

  explicit Dag(std::size_t n = 0) : size(n), succ(n) {}

  void add_edge(int a, int b) {
    auto& s = succ[static_cast<std::size_t>(a)];
    if (std::find(s.begin(), s.end(), b) == s.end()) s.push_back(b);
  }

  std::vector<int> indegree() const {
    std::vector<int> deg(size, 0);
    for (const auto& s : succ) {
      for (int b : s) ++deg[static_cast<std::size_t>(b)];
    }
    return deg;
  }

  bool acyclic() const {
    auto deg = indegree();
    std::vector<int> ready;
    for (std::size_t i = 0; i < size; ++i) {
      if (deg[i] == 0) ready.push_back(static_cast<int>(i));
    }
    std::size_t seen = 0;
    while (!ready.empty()) {
      int v = ready.back();
      ready.pop_back();
      ++seen;
      for (int b : succ[static_cast<std::size_t>(v)]) {
        if (--deg[static_cast<std::size_t>(b)] == 0) ready.push_back(b);
      }
    }
    return seen == size;
  }
};

// Sessions and constraint graphs of one slot. Session and member DAGs use
// local indices.
struct SlotStructure {
  std::vector<std::vector<CharacterId>> sessions;
  Dag session_dag;
  std::vector<Dag> member_dags;
  std::size_t active_count = 0;
};

std::vector<SlotStructure> build_structures(const StoryScript& script,
                                            const std::vector<OrderingConstraint>& constraints) {
  const auto n = static_cast<CharacterId>(script.num_characters());
  const auto table = session_table(script);
  std::vector<SlotStructure> out(script.num_slots());
  for (std::size_t j = 0; j < script.num_slots(); ++j) {
    auto& st = out[j];
    for (const auto& session : script.slots[j]) {
      st.sessions.push_back(session.members);
      st.active_count += session.members.size();
    }
    st.session_dag = Dag(st.sessions.size());
    for (const auto& s : st.sessions) st.member_dags.emplace_back(s.size());
  }
  for (const auto& c : constraints) {
    if (c.slot >= script.num_slots()) throw ConstraintConflict("ordering constraint slot out of range");
    if (c.ahead < 0 || c.ahead >= n || c.behind < 0 || c.behind >= n) {
      throw ConstraintConflict("ordering constraint references an unknown character");
    }
    if (c.ahead == c.behind) throw ConstraintConflict("ordering constraint pairs a character with itself");
    const int sa = table[static_cast<std::size_t>(c.ahead)][c.slot];
    const int sb = table[static_cast<std::size_t>(c.behind)][c.slot];
    if (sa < 0 || sb < 0) {
      throw ConstraintConflict("ordering constraint references a character inactive at slot " +
                               std::to_string(c.slot));
    }
    auto& st = out[c.slot];
    if (sa == sb) {
      const auto& members = st.sessions[static_cast<std::size_t>(sa)];
      auto local = [&](CharacterId id) {
        return static_cast<int>(std::lower_bound(members.begin(), members.end(), id) - members.begin());
      };
      st.member_dags[static_cast<std::size_t>(sa)].add_edge(local(c.ahead), local(c.behind));
    } else {
      st.session_dag.add_edge(sa, sb);
    }
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (!out[j].session_dag.acyclic()) {
      throw ConstraintConflict("ordering constraints at slot " + std::to_string(j) +
                               " are cyclic or would split a session");
    }
    for (const auto& dag : out[j].member_dags) {
      if (!dag.acyclic()) throw ConstraintConflict("cyclic ordering constraints at slot " + std::to_string(j));
    }
  }
  return out;
}

void linear_extensions(const Dag& dag, std::vector<int>& prefix, std::vector<char>& used,
                       std::vector<std::vector<int>>& out) {
  if (prefix.size() == dag.size) {
    out.push_back(prefix);
    return;
  }
  for (std::size_t v = 0; v < dag.size; ++v) {
    if (used[v]) continue;
    bool ready = true;
    for (std::size_t u = 0; u < dag.size && ready; ++u) {
      if (used[u]) continue;
      const auto& s = dag.succ[u];
      if (std::find(s.begin(), s.end(), static_cast<int>(v)) != s.end()) ready = false;
    }
    if (!ready) continue;
    used[v] = 1;
    prefix.push_back(static_cast<int>(v));
    linear_extensions(dag, prefix, used, out);
    prefix.pop_back();
    used[v] = 0;
  }
}

std::vector<std::vector<int>> all_linear_extensions(const Dag& dag) {
  std::vector<std::vector<int>> out;
  std::vector<int> prefix;
  std::vector<char> used(dag.size, 0);
  linear_extensions(dag, prefix, used, out);
  return out;
}

double factorial(std::size_t k) {
  double f = 1.0;
  for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
  return f;
}

double state_bound(const SlotStructure& st) {
  double b = factorial(st.sessions.size());
  for (const auto& s : st.sessions) b *= factorial(s.size());
  return b;
}

void expand_sessions(const SlotStructure& st, const std::vector<int>& session_order,
                     const std::vector<std::vector<std::vector<int>>>& member_orders, std::size_t p,
                     std::vector<CharacterId>& current, std::vector<std::vector<CharacterId>>& out) {
  if (p == session_order.size()) {
    out.push_back(current);
    return;
  }
  const auto s = static_cast<std::size_t>(session_order[p]);
  for (const auto& mo : member_orders[s]) {
    for (int local : mo) current.push_back(st.sessions[s][static_cast<std::size_t>(local)]);
    expand_sessions(st, session_order, member_orders, p + 1, current, out);
    current.resize(current.size() - mo.size());
  }
}

std::vector<std::vector<CharacterId>> enumerate_orders(const SlotStructure& st) {
  std::vector<std::vector<CharacterId>> result;
  std::vector<std::vector<std::vector<int>>> member_orders;
  for (const auto& dag : st.member_dags) member_orders.push_back(all_linear_extensions(dag));
  std::vector<CharacterId> current;
  for (const auto& so : all_linear_extensions(st.session_dag)) {
    expand_sessions(st, so, member_orders, 0, current, result);
  }
  return result;
}

void write_slot(OrderMatrix& order, std::size_t slot, const std::vector<CharacterId>& top_to_bottom) {
  for (std::size_t r = 0; r < top_to_bottom.size(); ++r) {
    order(static_cast<std::size_t>(top_to_bottom[r]), slot) = static_cast<int>(r);
  }
}

OrderMatrix solve_exact(const StoryScript& script, const std::vector<SlotStructure>& structures) {
  const std::size_t n = script.num_characters();
  const std::size_t m = script.num_slots();
  std::vector<std::vector<std::vector<int>>> ranks(m);  // slot -> state -> rank per character
  std::vector<std::vector<std::vector<CharacterId>>> states(m);
  for (std::size_t j = 0; j < m; ++j) {
    states[j] = enumerate_orders(structures[j]);
    for (const auto& o : states[j]) {
      std::vector<int> r(n, kAbsent);
      for (std::size_t k = 0; k < o.size(); ++k) r[static_cast<std::size_t>(o[k])] = static_cast<int>(k);
      ranks[j].push_back(std::move(r));
    }
  }

  // Lexicographic (crossings, total rank displacement).
  const auto weight = static_cast<std::int64_t>(n * n * m + 1);
  std::vector<std::vector<std::int64_t>> best(m);
  std::vector<std::vector<std::size_t>> from(m);
  best[0].assign(states[0].size(), 0);
  from[0].assign(states[0].size(), 0);
  for (std::size_t j = 1; j < m; ++j) {
    std::vector<std::size_t> common;
    for (std::size_t c = 0; c < n; ++c) {
      if (ranks[j - 1][0][c] != kAbsent && ranks[j][0][c] != kAbsent) common.push_back(c);
    }
    best[j].assign(states[j].size(), std::numeric_limits<std::int64_t>::max());
    from[j].assign(states[j].size(), 0);
    for (std::size_t t = 0; t < states[j].size(); ++t) {
      const auto& rt = ranks[j][t];
      for (std::size_t s = 0; s < states[j - 1].size(); ++s) {
        const auto& rs = ranks[j - 1][s];
        std::int64_t crossings = 0;
        std::int64_t displacement = 0;
        for (std::size_t a = 0; a < common.size(); ++a) {
          const auto ca = common[a];
          displacement += std::abs(rs[ca] - rt[ca]);
          for (std::size_t b = a + 1; b < common.size(); ++b) {
            const auto cb = common[b];
            if ((rs[ca] < rs[cb]) != (rt[ca] < rt[cb])) ++crossings;
          }
        }
        const auto cost = best[j - 1][s] + crossings * weight + displacement;
        if (cost < best[j][t]) {
          best[j][t] = cost;
          from[j][t] = s;
        }
      }
    }
  }
  std::size_t pick = 0;
  for (std::size_t t = 1; t < best[m - 1].size(); ++t) {
    if (best[m - 1][t] < best[m - 1][pick]) pick = t;
  }
  OrderMatrix order(n, m, kAbsent);
  for (std::size_t j = m; j-- > 0;) {
    write_slot(order, j, states[j][pick]);
    pick = from[j][pick];
  }
  return order;
}

// Topological selection: among ready items always take the smallest key.
template <typename Key>
std::vector<int> constrained_sort(const Dag& dag, const std::vector<Key>& keys) {
  auto deg = dag.indegree();
  std::vector<char> done(dag.size, 0);
  std::vector<int> out;
  out.reserve(dag.size);
  for (std::size_t step = 0; step < dag.size; ++step) {
    int pick = -1;
    for (std::size_t v = 0; v < dag.size; ++v) {
      if (done[v] || deg[v] != 0) continue;
      if (pick < 0 || keys[v] < keys[static_cast<std::size_t>(pick)]) pick = static_cast<int>(v);
    }
    done[static_cast<std::size_t>(pick)] = 1;
    out.push_back(pick);
    for (int b : dag.succ[static_cast<std::size_t>(pick)]) --deg[static_cast<std::size_t>(b)];
  }
  return out;
}

std::vector<CharacterId> order_slot(const SlotStructure& st, const std::vector<double>& key,
                                    const std::vector<double>& tiebreak) {
  using Key = std::tuple<double, double, CharacterId>;
  std::vector<Key> session_keys;
  for (const auto& s : st.sessions) {
    double k = 0.0;
    double t = 0.0;
    for (CharacterId c : s) {
      k += key[static_cast<std::size_t>(c)];
      t += tiebreak[static_cast<std::size_t>(c)];
    }
    const auto size = static_cast<double>(s.size());
    session_keys.emplace_back(k / size, t / size, s.front());
  }
  std::vector<CharacterId> out;
  for (int s : constrained_sort(st.session_dag, session_keys)) {
    const auto& members = st.sessions[static_cast<std::size_t>(s)];
    std::vector<Key> member_keys;
    for (CharacterId c : members) {
      member_keys.emplace_back(key[static_cast<std::size_t>(c)], tiebreak[static_cast<std::size_t>(c)], c);
    }
    for (int local : constrained_sort(st.member_dags[static_cast<std::size_t>(s)], member_keys)) {
      out.push_back(members[static_cast<std::size_t>(local)]);
    }
  }
  return out;
}

OrderMatrix solve_sweeps(const StoryScript& script, const std::vector<SlotStructure>& structures,
                         int passes) {
  const std::size_t n = script.num_characters();
  const std::size_t m = script.num_slots();
  OrderMatrix order(n, m, kAbsent);
  {
    std::vector<double> ids(n);
    std::iota(ids.begin(), ids.end(), 0.0);
    for (std::size_t j = 0; j < m; ++j) write_slot(order, j, order_slot(structures[j], ids, ids));
  }

  auto resort = [&](std::size_t j, std::size_t ref) {
    const double count_ref = static_cast<double>(structures[ref].active_count);
    const double count_j = std::max<double>(1.0, static_cast<double>(structures[j].active_count));
    std::vector<double> key(n, 0.0);
    std::vector<double> tiebreak(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      if (order(c, j) == kAbsent) continue;
      tiebreak[c] = order(c, j);
      key[c] = order(c, ref) != kAbsent ? order(c, ref) : order(c, j) * (count_ref / count_j);
    }
    auto next = order_slot(structures[j], key, tiebreak);
    bool changed = false;
    for (std::size_t r = 0; r < next.size(); ++r) {
      if (order(static_cast<std::size_t>(next[r]), j) != static_cast<int>(r)) changed = true;
    }
    write_slot(order, j, next);
    return changed;
  };

  OrderMatrix best = order;
  auto best_crossings = total_crossings(order);
  for (int pass = 0; pass < passes && m > 1; ++pass) {
    bool changed = false;
    for (std::size_t j = 1; j < m; ++j) changed = resort(j, j - 1) || changed;
    if (auto c = total_crossings(order); c < best_crossings) {
      best_crossings = c;
      best = order;
    }
    for (std::size_t j = m - 1; j-- > 0;) changed = resort(j, j + 1) || changed;
    if (auto c = total_crossings(order); c < best_crossings) {
      best_crossings = c;
      best = order;
    }
    if (!changed) break;
  }
  return best;
}

}  // namespace

std::int64_t transition_crossings(const OrderMatrix& order, std::size_t slot) {
  if (slot == 0) return 0;
  std::int64_t count = 0;
  const std::size_t n = order.rows();
  for (std::size_t a = 0; a < n; ++a) {
    if (order(a, slot) == kAbsent || order(a, slot - 1) == kAbsent) continue;
    for (std::size_t b = a + 1; b < n; ++b) {
      if (order(b, slot) == kAbsent || order(b, slot - 1) == kAbsent) continue;
      if ((order(a, slot - 1) < order(b, slot - 1)) != (order(a, slot) < order(b, slot))) ++count;
    }
  }
  return count;
}

std::int64_t total_crossings(const OrderMatrix& order) {
  std::int64_t total = 0;
  for (std::size_t j = 1; j < order.cols(); ++j) total += transition_crossings(order, j);
  return total;
}

std::vector<CharacterId> characters_by_rank(const OrderMatrix& order, std::size_t slot) {
  std::vector<CharacterId> out;
  for (std::size_t i = 0; i < order.rows(); ++i) {
    if (order(i, slot) != kAbsent) out.push_back(static_cast<CharacterId>(i));
  }
  std::sort(out.begin(), out.end(), [&](CharacterId a, CharacterId b) {
    return order(static_cast<std::size_t>(a), slot) < order(static_cast<std::size_t>(b), slot);
  });
  return out;
}

OrderMatrix compute_order(const StoryScript& script, const std::vector<OrderingConstraint>& constraints,
                          const OrderingLimits& limits) {
  const auto structures = build_structures(script, constraints);
  bool exact = true;
  double work = 0.0;
  for (std::size_t j = 0; j < structures.size() && exact; ++j) {
    const double b = state_bound(structures[j]);
    if (b > static_cast<double>(limits.max_states_per_slot)) exact = false;
    if (j > 0) work += b * state_bound(structures[j - 1]);
  }
  if (work > static_cast<double>(limits.max_transition_work)) exact = false;
  return exact ? solve_exact(script, structures) : solve_sweeps(script, structures, limits.sweep_passes);
}

}  // namespace storyline
