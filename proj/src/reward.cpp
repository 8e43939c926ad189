#include "storyline/reward.hpp"

#include "storyline/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace storyline {

void RewardConfig::validate() const {
  if (!(w1 >= 0) || !(w2 >= 0) || !(w3 >= 0) || !(w1 + w2 + w3 > 0)) {
    throw ValidationError("reward weights must be non-negative with a positive sum");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
}

namespace {

void require_same_shape(const Layout& a, const Layout& b) {
  if (!a.order.same_shape(b.order) || !a.align.same_shape(b.align) || !a.pos.same_shape(b.pos) ||
      !a.order.same_shape(a.pos)) {
    throw DimensionMismatch("layouts have different dimensions");
  }
}

double equal_count(const Grid<int>& a, const Grid<int>& b) {
  std::size_t count = 0;
  for (std::size_t k = 0; k < a.data().size(); ++k) count += a.data()[k] == b.data()[k];
  return static_cast<double>(count);
}

}  // namespace

double order_similarity(const Layout& a, const Layout& b) {
  require_same_shape(a, b);
  return equal_count(a.order, b.order);
}

double align_similarity(const Layout& a, const Layout& b) {
  require_same_shape(a, b);
  return equal_count(a.align, b.align);
}

PositionMatrix normalized_positions(const Layout& l) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double y : l.pos.data()) {
    if (std::isnan(y)) continue;
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  PositionMatrix out = l.pos;
  const double extent = hi - lo;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      double& y = out(i, j);
      if (std::isnan(y)) continue;
      y = extent > 0 ? (y - lo) / extent : 0.0;
    }
  }
  return out;
}

double position_distance(const Layout& a, const Layout& b) {
  require_same_shape(a, b);
  const auto na = normalized_positions(a);
  const auto nb = normalized_positions(b);
  double sum = 0.0;
  for (std::size_t k = 0; k < na.data().size(); ++k) {
    const double x = na.data()[k];
    const double y = nb.data()[k];
    if (std::isnan(x) || std::isnan(y)) continue;
    sum += (x - y) * (x - y);
  }
  return std::sqrt(sum);
}

FeatureVector features(const Layout& a, const Layout& b) {
  return {order_similarity(a, b), align_similarity(a, b), position_distance(a, b)};
}

double squash(double x) { return 2.0 * (1.0 / (1.0 + std::exp(-x)) - 0.5); }

// Losses live on a 2^-40 grid. Differences and short sums of grid values are
// exact in binary64, so episode rewards telescope without round-off.
double combined_loss(const FeatureVector& f, std::size_t cells, const RewardConfig& cfg) {
  const double nm = static_cast<double>(cells);
  const double s = cfg.w1 * squash(nm - f.s_order) + cfg.w2 * squash(nm - f.s_align) + cfg.w3 * squash(f.d_pos);
  return std::ldexp(std::nearbyint(std::ldexp(s, 40)), -40);
}

double combined_loss(const Layout& current, const Layout& user, const RewardConfig& cfg) {
  return combined_loss(features(current, user), current.order.data().size(), cfg);
}

std::vector<double> discounted_return(const std::vector<double>& rewards, double gamma) {
  std::vector<double> out(rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    out[k] = acc;
  }
  return out;
}

}  // namespace storyline
