#pragma once

#include "storyline/layout.hpp"

#include <vector>

namespace storyline {

struct RewardConfig {
  double w1 = 1.0;  // ordering
  double w2 = 1.0;  // alignment
  double w3 = 1.0;  // position
  double gamma = 1.0;

  void validate() const;  // throws ValidationError
};

struct FeatureVector {
  double s_order = 0.0;
  double s_align = 0.0;
  double d_pos = 0.0;
};

// Cells with equal ranks; absent-absent pairs match. Throws DimensionMismatch.
double order_similarity(const Layout& a, const Layout& b);
// Cells with equal indicators, same absent convention.
double align_similarity(const Layout& a, const Layout& b);
// Euclidean distance over mutually active cells after scaling each layout's
// positions to [0, 1] by its own vertical extent.
double position_distance(const Layout& a, const Layout& b);

FeatureVector features(const Layout& a, const Layout& b);

// Positions mapped to [0, 1] by the layout's min/max active y (0 when flat).
PositionMatrix normalized_positions(const Layout& layout);

// 2 * (sigmoid(x) - 0.5): 0 at 0, increasing, below 1.
double squash(double x);

// w1*squash(NM - s_order) + w2*squash(NM - s_align) + w3*squash(d_pos),
// rounded to a multiple of 2^-40.
double combined_loss(const Layout& current, const Layout& user, const RewardConfig& cfg = {});
double combined_loss(const FeatureVector& f, std::size_t cells, const RewardConfig& cfg = {});

inline double step_reward(double prev_loss, double next_loss) { return prev_loss - next_loss; }

// R_k = sum_{t >= k} gamma^(t-k) r_t.
std::vector<double> discounted_return(const std::vector<double>& rewards, double gamma);

}  // namespace storyline
