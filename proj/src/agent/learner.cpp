#include "storyline/agent/learner.hpp"

#include "storyline/errors.hpp"

#include <cmath>
#include <limits>

namespace storyline::agent {

UpdateBatch make_batch(const Trajectory& t, double gamma) {
  UpdateBatch b;
  if (t.steps.empty()) return b;
  const auto rows = t.steps.front().input.size();
  b.inputs.resize(rows, static_cast<Eigen::Index>(t.steps.size()));
  for (std::size_t k = 0; k < t.steps.size(); ++k) {
    const auto& s = t.steps[k];
    b.inputs.col(static_cast<Eigen::Index>(k)) = s.input;
    b.masks.push_back(s.masks);
    b.heads.push_back(s.head);
    b.indices.push_back(s.index);
  }
  b.returns = discounted_return(t.rewards(), gamma);
  return b;
}

namespace {

void check_batch(const UpdateBatch& b) {
  const auto n = b.size();
  if (n == 0) throw ValidationError("empty update batch");
  if (static_cast<std::size_t>(b.inputs.cols()) != n || b.masks.size() != n || b.indices.size() != n ||
      b.returns.size() != n) {
    throw ShapeMismatch("update batch fields disagree in length");
  }
}

struct HeadTerms {
  double log_prob = 0.0;
  double entropy = 0.0;
  Eigen::VectorXd probs;
};

HeadTerms head_terms(const Eigen::VectorXd& z, const std::vector<char>& mask, int index) {
  HeadTerms h;
  h.probs = masked_softmax(z, mask);
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (mask.empty() || mask[static_cast<std::size_t>(k)]) top = std::max(top, z(k));
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (mask.empty() || mask[static_cast<std::size_t>(k)]) sum += std::exp(z(k) - top);
  }
  h.log_prob = z(index) - top - std::log(sum);
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double p = h.probs(k);
    if (p > 0.0) h.entropy -= p * std::log(p);
  }
  return h;
}

std::array<Eigen::MatrixXd, 3> zero_logit_grads(const ForwardCache& c) {
  std::array<Eigen::MatrixXd, 3> d;
  for (std::size_t h = 0; h < 3; ++h) d[h] = Eigen::MatrixXd::Zero(c.logits[h].rows(), c.logits[h].cols());
  return d;
}

// d(objective)/d(logits), accumulated with weight `scale`.
void add_policy_logit_grads(const ForwardCache& c, const UpdateBatch& b, const std::vector<double>& adv,
                            double entropy, double scale, std::array<Eigen::MatrixXd, 3>& d) {
  for (std::size_t k = 0; k < b.size(); ++k) {
    const auto h = static_cast<std::size_t>(b.heads[k]);
    const auto col = static_cast<Eigen::Index>(k);
    const HeadTerms t = head_terms(c.logits[h].col(col), b.masks[k][h], b.indices[k]);
    Eigen::VectorXd g = -adv[k] * t.probs;
    g(b.indices[k]) += adv[k];
    if (entropy != 0.0) {
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double p = t.probs(i);
        if (p > 0.0) g(i) += entropy * (-p * (std::log(p) + t.entropy));
      }
    }
    d[h].col(col) += scale * g;
  }
}

Eigen::RowVectorXd value_grads(const ForwardCache& c, const UpdateBatch& b, double scale) {
  Eigen::RowVectorXd d(static_cast<Eigen::Index>(b.size()));
  for (std::size_t k = 0; k < b.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    d(col) = scale * -2.0 * (b.returns[k] - c.value(col));
  }
  return d;
}

}  // namespace

double policy_objective(const ModelParams& p, const UpdateBatch& b, const std::vector<double>& adv, double entropy) {
  check_batch(b);
  const ForwardCache c = forward(p, b.inputs);
  double j = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const auto h = static_cast<std::size_t>(b.heads[k]);
    const HeadTerms t = head_terms(c.logits[h].col(static_cast<Eigen::Index>(k)), b.masks[k][h], b.indices[k]);
    j += adv[k] * t.log_prob + entropy * t.entropy;
  }
  return j;
}

ModelParams policy_gradient(const ModelParams& p, const UpdateBatch& b, const std::vector<double>& adv,
                            double entropy) {
  check_batch(b);
  const ForwardCache c = forward(p, b.inputs);
  auto d = zero_logit_grads(c);
  add_policy_logit_grads(c, b, adv, entropy, 1.0, d);
  return backward(p, c, d, Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(b.size())));
}

double value_loss(const ModelParams& p, const UpdateBatch& b) {
  check_batch(b);
  const ForwardCache c = forward(p, b.inputs);
  double l = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double r = b.returns[k] - c.value(static_cast<Eigen::Index>(k));
    l += r * r;
  }
  return l;
}

ModelParams value_gradient(const ModelParams& p, const UpdateBatch& b) {
  check_batch(b);
  const ForwardCache c = forward(p, b.inputs);
  return backward(p, c, zero_logit_grads(c), value_grads(c, b, 1.0));
}

namespace {

std::vector<double> advantages_from(const ForwardCache& c, const UpdateBatch& b, bool normalize) {
  std::vector<double> a(b.size());
  for (std::size_t k = 0; k < b.size(); ++k) a[k] = b.returns[k] - c.value(static_cast<Eigen::Index>(k));
  if (normalize && a.size() > 1) {
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(a.size());
    double var = 0.0;
    for (double v : a) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(a.size()));
    for (double& v : a) v = (v - mean) / (sd + 1e-8);
  }
  return a;
}

}  // namespace

std::vector<double> advantages(const ModelParams& p, const UpdateBatch& b, bool normalize) {
  check_batch(b);
  return advantages_from(forward(p, b.inputs), b, normalize);
}

ModelParams update_step(const ModelParams& p, const UpdateBatch& b, double lr_pi, double lr_v,
                        const UpdateOptions& options) {
  check_batch(b);
  if (!(lr_pi >= 0.0) || !(lr_v >= 0.0) || !std::isfinite(lr_pi) || !std::isfinite(lr_v)) {
    throw ValidationError("learning rates must be finite and non-negative");
  }
  const ForwardCache c = forward(p, b.inputs);
  const auto adv = advantages_from(c, b, options.normalize_advantage);
  auto d = zero_logit_grads(c);
  add_policy_logit_grads(c, b, adv, options.entropy, lr_pi, d);
  ModelParams step = backward(p, c, d, value_grads(c, b, -lr_v));
  if (!step.finite()) throw NonFiniteGradient("actor-critic gradient is not finite");
  if (options.max_step_norm > 0.0) {
    double sq = 0.0;
    step.for_each_block([&](const auto& blk) { sq += blk.squaredNorm(); });
    const double norm = std::sqrt(sq);
    if (norm > options.max_step_norm) step.for_each_block([&](auto& blk) { blk *= options.max_step_norm / norm; });
  }
  return step;
}

void AdamOptimizer::apply(ModelParams& params, const ModelParams& g) {
  if (steps == 0) {
    m = ModelParams::zeros_like(params);
    v = ModelParams::zeros_like(params);
  }
  ++steps;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
  std::vector<double*> gm;
  std::vector<double*> gv;
  std::vector<const double*> gg;
  m.for_each_block([&](auto& blk) { gm.push_back(blk.data()); });
  v.for_each_block([&](auto& blk) { gv.push_back(blk.data()); });
  g.for_each_block([&](const auto& blk) { gg.push_back(blk.data()); });
  std::size_t k = 0;
  params.for_each_block([&](auto& blk) {
    const Eigen::Index n = blk.size();
    Eigen::Map<Eigen::ArrayXd> mm(gm[k], n);
    Eigen::Map<Eigen::ArrayXd> vv(gv[k], n);
    Eigen::Map<const Eigen::ArrayXd> d(gg[k], n);
    mm = beta1 * mm + (1.0 - beta1) * d;
    vv = beta2 * vv + (1.0 - beta2) * d.square();
    Eigen::Map<Eigen::ArrayXd>(blk.data(), n) += rate * (mm / c1) / ((vv / c2).sqrt() + epsilon);
    ++k;
  });
}

ModelParams actor_critic_update(const ModelParams& p, const Trajectory& t, const EpisodeConfig& cfg, double lr_pi,
                                double lr_v, const UpdateOptions& options) {
  if (t.steps.empty()) throw ValidationError("cannot update from an empty trajectory");
  const ModelParams step = update_step(p, make_batch(t, cfg.reward.gamma), lr_pi, lr_v, options);
  ModelParams out = p;
  out.axpy(1.0, step);
  if (!out.finite()) throw NonFiniteGradient("update produced non-finite parameters");
  return out;
}

}  // namespace storyline::agent
