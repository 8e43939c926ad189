#pragma once

#include "storyline/agent/policy.hpp"

#include <string>

namespace storyline::agent {

// Binary container: "STRLCKPT", uint32 version, uint64 header length, JSON
// header (network config, action space, grid side, episode config, block
// shapes, user metadata), then every parameter as little-endian doubles.
struct Checkpoint {
  Policy policy;
  EpisodeConfig episode;
  nlohmann::json metadata = nlohmann::json::object();
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws SyntaxError for unreadable files, ShapeMismatch when the stored
// shapes disagree with the header or the parameter payload.
Checkpoint load_checkpoint(const std::string& path);
// Additionally requires the stored network to match `expected`.
Checkpoint load_checkpoint(const std::string& path, const NetworkConfig& expected);

}  // namespace storyline::agent
