#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

#include "json.hpp"

namespace storyline::agent {

// Fully connected trunk with rectifier activations. From the second layer on,
// each layer adds a parameter-free shortcut: the previous activations
// averaged in groups of (previous width / width).
struct NetworkConfig {
  int input_size = 0;
  std::vector<int> widths{512, 256, 128};
  std::array<int, 3> head_sizes{0, 0, 0};

  void validate() const;  // throws ValidationError
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

nlohmann::json to_json(const NetworkConfig& c);
NetworkConfig network_config_from_json(const nlohmann::json& doc);

struct Dense {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

struct ModelParams {
  NetworkConfig config;
  std::vector<Dense> trunk;
  std::array<Dense, 3> heads;
  Dense value;

  // He-initialized trunk, zero heads and value layer.
  static ModelParams initialize(const NetworkConfig& config, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& p);
  static ModelParams allocate(const NetworkConfig& config);  // all zeros

  std::size_t parameter_count() const;
  bool finite() const;
  // Visits every parameter block in a fixed order.
  template <typename F>
  void for_each_block(F&& f) {
    for (auto& d : trunk) {
      f(d.W);
      f(d.b);
    }
    for (auto& d : heads) {
      f(d.W);
      f(d.b);
    }
    f(value.W);
    f(value.b);
  }
  template <typename F>
  void for_each_block(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_block([&](const auto& blk) { f(blk); });
  }

  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);  // throws ShapeMismatch
  void axpy(double alpha, const ModelParams& other);  // this += alpha * other
};

// Column-batched forward pass; inputs are input_size x B.
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;  // per trunk layer
  std::vector<Eigen::MatrixXd> act;
  std::array<Eigen::MatrixXd, 3> logits;  // head_size x B
  Eigen::RowVectorXd value;               // 1 x B
};

ForwardCache forward(const ModelParams& p, const Eigen::MatrixXd& inputs);  // throws ShapeMismatch

// Gradient of an objective given its derivatives w.r.t. the head logits and
// value outputs (same shapes as in the cache).
ModelParams backward(const ModelParams& p, const ForwardCache& cache, const std::array<Eigen::MatrixXd, 3>& d_logits,
                     const Eigen::RowVectorXd& d_value);

// Softmax restricted to entries with mask != 0 (others get probability 0).
// An empty mask yields the plain softmax.
Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, const std::vector<char>& mask);

}  // namespace storyline::agent
