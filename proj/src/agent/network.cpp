#include "storyline/agent/network.hpp"

#include "storyline/errors.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace storyline::agent {

void NetworkConfig::validate() const {
  if (input_size <= 0 || widths.empty()) throw ValidationError("network needs an input size and trunk widths");
  for (std::size_t l = 0; l < widths.size(); ++l) {
    if (widths[l] <= 0) throw ValidationError("trunk widths must be positive");
    if (l > 0 && widths[l - 1] % widths[l] != 0) {
      throw ValidationError("each trunk width must divide the previous one");
    }
  }
  for (int h : head_sizes) {
    if (h <= 0) throw ValidationError("head sizes must be positive");
  }
}

nlohmann::json to_json(const NetworkConfig& c) {
  return {{"input_size", c.input_size}, {"widths", c.widths}, {"head_sizes", c.head_sizes}};
}

NetworkConfig network_config_from_json(const nlohmann::json& doc) {
  NetworkConfig c;
  try {
    c.input_size = doc.at("input_size").get<int>();
    c.widths = doc.at("widths").get<std::vector<int>>();
    c.head_sizes = doc.at("head_sizes").get<std::array<int, 3>>();
  } catch (const nlohmann::json::exception& e) {
    throw SyntaxError(std::string("bad network config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelParams ModelParams::allocate(const NetworkConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  int in = config.input_size;
  for (int w : config.widths) {
    p.trunk.push_back({Eigen::MatrixXd::Zero(w, in), Eigen::VectorXd::Zero(w)});
    in = w;
  }
  for (std::size_t h = 0; h < 3; ++h) {
    p.heads[h] = {Eigen::MatrixXd::Zero(config.head_sizes[h], in), Eigen::VectorXd::Zero(config.head_sizes[h])};
  }
  p.value = {Eigen::MatrixXd::Zero(1, in), Eigen::VectorXd::Zero(1)};
  return p;
}

ModelParams ModelParams::initialize(const NetworkConfig& config, std::uint64_t seed) {
  ModelParams p = allocate(config);
  std::mt19937_64 rng(seed);
  for (auto& d : p.trunk) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(d.W.cols())));
    for (Eigen::Index k = 0; k < d.W.size(); ++k) d.W.data()[k] = dist(rng);
  }
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& src) {
  ModelParams p = src;
  p.for_each_block([](auto& blk) { blk.setZero(); });
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&](const auto& blk) { n += static_cast<std::size_t>(blk.size()); });
  return n;
}

bool ModelParams::finite() const {
  bool ok = true;
  for_each_block([&](const auto& blk) { ok = ok && blk.allFinite(); });
  return ok;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for_each_block([&](const auto& blk) { out.insert(out.end(), blk.data(), blk.data() + blk.size()); });
  return out;
}

void ModelParams::assign(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw ShapeMismatch("parameter vector has the wrong length");
  std::size_t at = 0;
  for_each_block([&](auto& blk) {
    std::copy(flat.begin() + static_cast<long>(at), flat.begin() + static_cast<long>(at + blk.size()), blk.data());
    at += static_cast<std::size_t>(blk.size());
  });
}

void ModelParams::axpy(double alpha, const ModelParams& other) {
  std::vector<const double*> src;
  std::vector<Eigen::Index> sizes;
  other.for_each_block([&](const auto& blk) {
    src.push_back(blk.data());
    sizes.push_back(blk.size());
  });
  std::size_t k = 0;
  for_each_block([&](auto& blk) {
    if (sizes[k] != blk.size()) throw ShapeMismatch("parameter shapes differ");
    Eigen::Map<const Eigen::VectorXd> s(src[k], sizes[k]);
    Eigen::Map<Eigen::VectorXd>(blk.data(), blk.size()) += alpha * s;
    ++k;
  });
}

namespace {

// Average of consecutive groups of rows: (w * g) x B -> w x B.
Eigen::MatrixXd pool_rows(const Eigen::MatrixXd& x, Eigen::Index w) {
  const Eigen::Index g = x.rows() / w;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(w, x.cols());
  for (Eigen::Index r = 0; r < w; ++r) out.row(r) = x.middleRows(r * g, g).colwise().sum() / static_cast<double>(g);
  return out;
}

// Adjoint of pool_rows.
Eigen::MatrixXd unpool_rows(const Eigen::MatrixXd& d, Eigen::Index rows) {
  const Eigen::Index g = rows / d.rows();
  Eigen::MatrixXd out(rows, d.cols());
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    for (Eigen::Index k = 0; k < g; ++k) out.row(r * g + k) = d.row(r) / static_cast<double>(g);
  }
  return out;
}

// Rows of x that are nonzero in some column; empty when x is not sparse
// enough for gathering to pay off.
std::vector<Eigen::Index> sparse_rows(const Eigen::MatrixXd& x) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if ((x.row(r).array() != 0.0).any()) rows.push_back(r);
  }
  if (rows.size() * 4 > static_cast<std::size_t>(x.rows())) rows.clear();
  return rows;
}

}  // namespace

ForwardCache forward(const ModelParams& p, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != p.config.input_size) throw ShapeMismatch("input size does not match the network");
  ForwardCache c;
  c.input = inputs;
  const Eigen::MatrixXd* h = &c.input;
  for (std::size_t l = 0; l < p.trunk.size(); ++l) {
    const auto& d = p.trunk[l];
    Eigen::MatrixXd z;
    const auto rows = l == 0 ? sparse_rows(*h) : std::vector<Eigen::Index>{};
    if (!rows.empty()) {
      z = d.W(Eigen::all, rows) * (*h)(rows, Eigen::all);
    } else {
      z = d.W * (*h);
    }
    z.colwise() += d.b;
    Eigen::MatrixXd a = z.cwiseMax(0.0);
    if (l > 0) a += pool_rows(*h, d.W.rows());
    c.pre.push_back(std::move(z));
    c.act.push_back(std::move(a));
    h = &c.act.back();
  }
  for (std::size_t k = 0; k < 3; ++k) {
    c.logits[k] = p.heads[k].W * (*h);
    c.logits[k].colwise() += p.heads[k].b;
  }
  Eigen::MatrixXd v = p.value.W * (*h);
  v.colwise() += p.value.b;
  c.value = v.row(0);
  return c;
}

ModelParams backward(const ModelParams& p, const ForwardCache& c, const std::array<Eigen::MatrixXd, 3>& d_logits,
                     const Eigen::RowVectorXd& d_value) {
  ModelParams g = ModelParams::zeros_like(p);
  const Eigen::MatrixXd& top = c.act.back();
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(top.rows(), top.cols());
  for (std::size_t k = 0; k < 3; ++k) {
    g.heads[k].W.noalias() = d_logits[k] * top.transpose();
    g.heads[k].b = d_logits[k].rowwise().sum();
    dh.noalias() += p.heads[k].W.transpose() * d_logits[k];
  }
  g.value.W.noalias() = d_value * top.transpose();
  g.value.b(0) = d_value.sum();
  dh.noalias() += p.value.W.transpose() * d_value;

  for (std::size_t l = p.trunk.size(); l-- > 0;) {
    const Eigen::MatrixXd& below = l == 0 ? c.input : c.act[l - 1];
    Eigen::MatrixXd dz = dh.cwiseProduct((c.pre[l].array() > 0.0).cast<double>().matrix());
    const auto rows = l == 0 ? sparse_rows(below) : std::vector<Eigen::Index>{};
    if (!rows.empty()) {
      g.trunk[l].W(Eigen::all, rows) = dz * below(rows, Eigen::all).transpose();
    } else {
      g.trunk[l].W.noalias() = dz * below.transpose();
    }
    g.trunk[l].b = dz.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd next = p.trunk[l].W.transpose() * dz;
    next += unpool_rows(dh, below.rows());
    dh = std::move(next);
  }
  return g;
}

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, const std::vector<char>& mask) {
  const bool use_mask = !mask.empty();
  if (use_mask && mask.size() != static_cast<std::size_t>(logits.size())) throw ShapeMismatch("mask size mismatch");
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    if (!use_mask || mask[static_cast<std::size_t>(k)]) top = std::max(top, logits(k));
  }
  Eigen::VectorXd p = Eigen::VectorXd::Zero(logits.size());
  if (!std::isfinite(top)) return p;
  double sum = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    if (use_mask && !mask[static_cast<std::size_t>(k)]) continue;
    p(k) = std::exp(logits(k) - top);
    sum += p(k);
  }
  return p / sum;
}

}  // namespace storyline::agent
