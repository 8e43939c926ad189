#include "storyline/agent/action_space.hpp"

#include "storyline/errors.hpp"

#include <algorithm>
#include <cmath>

namespace storyline::agent {

const char* to_string(Head h) {
  switch (h) {
    case Head::kShift: return "shift";
    case Head::kBend: return "bend";
    case Head::kScale: return "scale";
  }
  return "unknown";
}

int ActionSpace::head_size(Head h) const {
  switch (h) {
    case Head::kShift: return slot_buckets * max_characters * 2;
    case Head::kBend: return max_characters * slot_buckets * 2;
    case Head::kScale: return slot_buckets * (max_characters - 1) * static_cast<int>(bounds.size());
  }
  return 0;
}

void ActionSpace::validate() const {
  if (max_characters < 2 || slot_buckets < 1 || bounds.empty()) throw ValidationError("degenerate action space");
  for (const auto& [d1, d2] : bounds) {
    if (!(d1 >= 0.0) || !(d1 < d2)) throw ValidationError("action bound menu needs 0 <= d1 < d2");
  }
}

std::pair<std::size_t, std::size_t> ActionSpace::bucket_range(int bucket, std::size_t slots) const {
  const auto b = static_cast<std::size_t>(bucket);
  const auto nb = static_cast<std::size_t>(slot_buckets);
  return {b * slots / nb, (b + 1) * slots / nb};
}

nlohmann::json to_json(const ActionSpace& s) {
  nlohmann::json bounds = nlohmann::json::array();
  for (const auto& [d1, d2] : s.bounds) bounds.push_back({d1, d2});
  return {{"max_characters", s.max_characters}, {"slot_buckets", s.slot_buckets}, {"bounds", bounds}};
}

ActionSpace action_space_from_json(const nlohmann::json& doc) {
  ActionSpace s;
  try {
    s.max_characters = doc.at("max_characters").get<int>();
    s.slot_buckets = doc.at("slot_buckets").get<int>();
    s.bounds.clear();
    for (const auto& b : doc.at("bounds")) s.bounds.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw SyntaxError(std::string("bad action space descriptor: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

int character_at_rank(const Layout& l, std::size_t slot, int rank) {
  for (std::size_t i = 0; i < l.num_characters(); ++i) {
    if (l.order(i, slot) == rank) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

std::optional<NarrativeConstraint> decode(const ActionSpace& space, const Layout& l, Head head, int index) {
  const int n = space.max_characters;
  const std::size_t m = l.num_slots();
  if (index < 0 || index >= space.head_size(head)) return std::nullopt;
  switch (head) {
    case Head::kShift: {
      const int bucket = index / (n * 2);
      const int character = (index / 2) % n;
      const bool up = index % 2 == 0;
      if (static_cast<std::size_t>(character) >= l.num_characters()) return std::nullopt;
      const auto [lo, hi] = space.bucket_range(bucket, m);
      for (std::size_t j = lo; j < hi; ++j) {
        const int r = l.order(static_cast<std::size_t>(character), j);
        if (r == kAbsent) continue;
        const int other = character_at_rank(l, j, up ? r - 1 : r + 1);
        if (other < 0) continue;
        return up ? OrderingConstraint{j, character, other} : OrderingConstraint{j, other, character};
      }
      return std::nullopt;
    }
    case Head::kBend: {
      const int character = index / (space.slot_buckets * 2);
      const int bucket = (index / 2) % space.slot_buckets;
      const int value = index % 2;
      if (static_cast<std::size_t>(character) >= l.num_characters()) return std::nullopt;
      const auto c = static_cast<std::size_t>(character);
      const auto [lo, hi] = space.bucket_range(bucket, m);
      for (std::size_t j = std::max<std::size_t>(lo, 1); j < hi; ++j) {
        if (!l.active(c, j) || !l.active(c, j - 1)) continue;
        if (l.align(c, j) == value) continue;
        return AlignmentConstraint{character, j, value};
      }
      return std::nullopt;
    }
    case Head::kScale: {
      const int nb = static_cast<int>(space.bounds.size());
      const int bucket = index / ((n - 1) * nb);
      const int pair = (index / nb) % (n - 1);
      const auto [d1, d2] = space.bounds[static_cast<std::size_t>(index % nb)];
      const auto [lo, hi] = space.bucket_range(bucket, m);
      for (std::size_t j = lo; j < hi; ++j) {
        const int a = character_at_rank(l, j, pair);
        const int b = character_at_rank(l, j, pair + 1);
        if (a < 0 || b < 0) continue;
        const double gap = std::abs(l.pos(static_cast<std::size_t>(b), j) - l.pos(static_cast<std::size_t>(a), j));
        if (gap > d1 && gap < d2) continue;
        // Session neighbors sit exactly inner_gap apart; separate sessions
        // cannot come closer than outer_gap.
        const bool same_session = std::abs(gap - l.params.inner_gap) <= l.params.position_tolerance;
        if (same_session || d2 <= l.params.outer_gap) continue;
        return CompactionConstraint{j, a, b, d1, d2};
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::vector<char> valid_mask(const ActionSpace& space, const Layout& l, Head head,
                             const std::vector<NarrativeConstraint>& accumulated,
                             std::vector<std::optional<NarrativeConstraint>>* decoded) {
  const int size = space.head_size(head);
  std::vector<char> mask(static_cast<std::size_t>(size), 0);
  if (decoded) decoded->assign(static_cast<std::size_t>(size), std::nullopt);
  for (int k = 0; k < size; ++k) {
    auto c = decode(space, l, head, k);
    if (!c) continue;
    if (std::find(accumulated.begin(), accumulated.end(), *c) != accumulated.end()) continue;
    mask[static_cast<std::size_t>(k)] = 1;
    if (decoded) (*decoded)[static_cast<std::size_t>(k)] = std::move(c);
  }
  return mask;
}

}  // namespace storyline::agent
