#include "storyline/agent/checkpoint.hpp"

#include "storyline/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace storyline::agent {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'T', 'R', 'L', 'C', 'K', 'P', 'T'};

nlohmann::json block_shapes(const ModelParams& p) {
  nlohmann::json shapes = nlohmann::json::array();
  p.for_each_block([&](const auto& blk) { shapes.push_back({blk.rows(), blk.cols()}); });
  return shapes;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const nlohmann::json header = {{"network", to_json(c.policy.params.config)},
                                 {"action_space", to_json(c.policy.space)},
                                 {"grid", c.policy.H},
                                 {"episode", to_json(c.episode)},
                                 {"shapes", block_shapes(c.policy.params)},
                                 {"metadata", c.metadata}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path);
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t length = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  c.policy.params.for_each_block([&](const auto& blk) {
    out.write(reinterpret_cast<const char*>(blk.data()), static_cast<std::streamsize>(blk.size() * sizeof(double)));
  });
  if (!out) throw Error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SyntaxError("cannot open checkpoint " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw SyntaxError(path + " is not a checkpoint");
  if (version != kCheckpointVersion) throw SyntaxError("unsupported checkpoint version " + std::to_string(version));
  if (length > (1u << 26)) throw SyntaxError("checkpoint header is implausibly large");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw SyntaxError("truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SyntaxError(std::string("bad checkpoint header: ") + e.what());
  }
  Checkpoint c;
  try {
    c.policy.space = action_space_from_json(header.at("action_space"));
    c.policy.H = header.at("grid").get<int>();
    c.episode = episode_config_from_json(header.at("episode"));
    c.metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw SyntaxError(std::string("bad checkpoint header: ") + e.what());
  }
  const NetworkConfig nc = network_config_from_json(header.at("network"));
  if (nc != Policy::network_config(c.policy.space, c.policy.H, nc.widths)) {
    throw ShapeMismatch("checkpoint network does not fit its grid and action space");
  }
  c.policy.params = ModelParams::allocate(nc);
  if (header.at("shapes") != block_shapes(c.policy.params)) {
    throw ShapeMismatch("checkpoint block shapes disagree with its network config");
  }
  c.policy.params.for_each_block([&](auto& blk) {
    in.read(reinterpret_cast<char*>(blk.data()), static_cast<std::streamsize>(blk.size() * sizeof(double)));
  });
  if (!in) throw ShapeMismatch("checkpoint payload is shorter than its shapes");
  if (in.peek() != std::char_traits<char>::eof()) throw ShapeMismatch("checkpoint payload is longer than its shapes");
  if (!c.policy.params.finite()) throw SyntaxError("checkpoint holds non-finite parameters");
  return c;
}

Checkpoint load_checkpoint(const std::string& path, const NetworkConfig& expected) {
  Checkpoint c = load_checkpoint(path);
  if (!(c.policy.params.config == expected)) throw ShapeMismatch("checkpoint network differs from the expected one");
  return c;
}

}  // namespace storyline::agent
