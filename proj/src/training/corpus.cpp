#include "storyline/training/corpus.hpp"

#include "storyline/engine.hpp"
#include "storyline/errors.hpp"
#include "storyline/serialize.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace storyline::training {

namespace fs = std::filesystem;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

namespace {

bool feasible(const StoryScript& script, const std::vector<NarrativeConstraint>& cs, const LayoutParams& params) {
  try {
    layout(script, cs, params);
    return true;
  } catch (const ConstraintConflict&) {
    return false;
  } catch (const InfeasibleConstraints&) {
    return false;
  }
}

bool contains(const std::vector<NarrativeConstraint>& v, const NarrativeConstraint& c) {
  return std::find(v.begin(), v.end(), c) != v.end();
}

}  // namespace

ConstraintPools generate_constraint_pool(const StoryScript& script, std::size_t per_group, std::uint64_t seed,
                                         const LayoutParams& params, const agent::ActionSpace& space) {
  validate_script(script);
  space.validate();
  ConstraintPools pools;
  const Layout origin = layout(script, {}, params);
  const std::size_t n = script.num_characters();
  const std::size_t m = script.num_slots();
  std::mt19937_64 rng(seed);
  auto uniform = [&](std::size_t hi) { return std::uniform_int_distribution<std::size_t>(0, hi - 1)(rng); };

  std::vector<std::size_t> slots_with_pairs;
  std::vector<std::pair<std::size_t, std::size_t>> straight_cells;  // (character, slot >= 1)
  for (std::size_t j = 0; j < m; ++j) {
    if (active_set(script, j).size() >= 2) slots_with_pairs.push_back(j);
    for (std::size_t i = 0; j > 0 && i < n; ++i) {
      if (origin.active(i, j) && origin.active(i, j - 1)) straight_cells.emplace_back(i, j);
    }
  }

  const std::size_t attempts = 40 * per_group + 40;
  auto fill = [&](std::vector<NarrativeConstraint>& out, auto&& draw) {
    for (std::size_t a = 0; a < attempts && out.size() < per_group; ++a) {
      const auto c = draw();
      if (!c || contains(out, *c) || !feasible(script, {*c}, params)) continue;
      out.push_back(*c);
    }
  };

  fill(pools.ordering, [&]() -> std::optional<NarrativeConstraint> {
    if (slots_with_pairs.empty()) return std::nullopt;
    const std::size_t j = slots_with_pairs[uniform(slots_with_pairs.size())];
    auto act = active_set(script, j);
    std::shuffle(act.begin(), act.end(), rng);
    return OrderingConstraint{j, act[0], act[1]};
  });
  fill(pools.alignment, [&]() -> std::optional<NarrativeConstraint> {
    if (straight_cells.empty()) return std::nullopt;
    const auto [i, j] = straight_cells[uniform(straight_cells.size())];
    return AlignmentConstraint{static_cast<CharacterId>(i), j, static_cast<int>(uniform(2))};
  });
  fill(pools.compaction, [&]() -> std::optional<NarrativeConstraint> {
    if (slots_with_pairs.empty()) return std::nullopt;
    const std::size_t j = slots_with_pairs[uniform(slots_with_pairs.size())];
    const auto count = active_set(script, j).size();
    const int rank = static_cast<int>(uniform(count - 1));
    CharacterId a = -1;
    CharacterId b = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (origin.order(i, j) == rank) a = static_cast<CharacterId>(i);
      if (origin.order(i, j) == rank + 1) b = static_cast<CharacterId>(i);
    }
    const auto [d1, d2] = space.bounds[uniform(space.bounds.size())];
    return CompactionConstraint{j, a, b, d1, d2};
  });
  return pools;
}

nlohmann::json pair_to_json(const TrainingPair& p) {
  return {{"script", p.script_id},         {"index", p.index},
          {"seed", p.seed},                {"origin", layout_to_json(p.origin)},
          {"user", layout_to_json(p.user)}, {"ground_truth", constraints_to_json(p.ground_truth)}};
}

TrainingPair pair_from_json(const nlohmann::json& doc) {
  TrainingPair p;
  try {
    p.script_id = doc.at("script").get<std::string>();
    p.index = doc.at("index").get<std::size_t>();
    p.seed = doc.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SyntaxError(std::string("bad training pair: ") + e.what());
  }
  p.origin = layout_from_json(doc.at("origin"));
  p.user = layout_from_json(doc.at("user"));
  p.ground_truth = constraints_from_json(doc.at("ground_truth"));
  return p;
}

TrainingPair sample_user_layout(const StoryScript& script, int K, std::uint64_t seed, const LayoutParams& params,
                                const agent::ActionSpace& space) {
  if (K < 1) throw ValidationError("K must be at least 1");
  const auto per_group = static_cast<std::size_t>(std::max(K, 10));
  const ConstraintPools pools = generate_constraint_pool(script, per_group, mix_seed(seed, 1), params, space);
  std::array<std::vector<NarrativeConstraint>, 3> groups{pools.ordering, pools.alignment, pools.compaction};
  std::mt19937_64 rng(mix_seed(seed, 2));

  TrainingPair p;
  p.seed = seed;
  const std::size_t retries = 20 * static_cast<std::size_t>(K) + 50;
  std::size_t failures = 0;
  while (p.ground_truth.size() < static_cast<std::size_t>(K)) {
    std::vector<std::size_t> nonempty;
    for (std::size_t g = 0; g < 3; ++g) {
      if (!groups[g].empty()) nonempty.push_back(g);
    }
    if (nonempty.empty() || failures > retries) {
      throw ExhaustedRetries("could not draw " + std::to_string(K) + " jointly feasible constraints (got " +
                             std::to_string(p.ground_truth.size()) + ")");
    }
    auto& group = groups[nonempty[std::uniform_int_distribution<std::size_t>(0, nonempty.size() - 1)(rng)]];
    const auto pick = std::uniform_int_distribution<std::size_t>(0, group.size() - 1)(rng);
    const NarrativeConstraint c = group[pick];
    group.erase(group.begin() + static_cast<long>(pick));
    auto trial = p.ground_truth;
    trial.push_back(c);
    if (feasible(script, trial, params)) {
      p.ground_truth = std::move(trial);
    } else {
      ++failures;
    }
  }
  p.origin = layout(script, {}, params);
  p.user = layout(script, p.ground_truth, params);
  return p;
}

std::vector<NamedScript> load_scripts_dir(const std::string& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  if (ec) throw Error("cannot read script directory " + dir + ": " + ec.message());
  std::sort(files.begin(), files.end());
  std::vector<NamedScript> out;
  for (const auto& f : files) {
    try {
      out.push_back({f.stem().string(), load_script_file(f.string())});
    } catch (const Error& e) {
      throw Error(f.string() + ": " + e.what());
    }
  }
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int k = 0; k < len; ++k) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
  return hex.str();
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw SyntaxError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + p.string());
}

}  // namespace

nlohmann::json build_corpus(const std::vector<NamedScript>& scripts, const CorpusOptions& o,
                            const std::string& out_dir) {
  if (scripts.empty()) throw ValidationError("no scripts to build a corpus from");
  if (o.per_script < 1) throw ValidationError("per_script must be at least 1");
  const std::size_t s_count = scripts.size();
  std::vector<std::string> chunks(s_count);
  std::vector<std::exception_ptr> errors(s_count);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t s; (s = next.fetch_add(1)) < s_count;) {
      try {
        std::string text;
        for (std::size_t k = 0; k < o.per_script; ++k) {
          TrainingPair p = sample_user_layout(scripts[s].script, o.K, mix_seed(o.seed, s, k), o.params);
          p.script_id = scripts[s].id;
          p.index = k;
          text += pair_to_json(p).dump() + "\n";
        }
        chunks[s] = std::move(text);
      } catch (const std::exception& e) {
        errors[s] = std::make_exception_ptr(Error("script " + scripts[s].id + ": " + e.what()));
      }
    }
  };
  const int threads = std::clamp(o.threads, 1, static_cast<int>(s_count));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  nlohmann::json script_docs = nlohmann::json::object();
  nlohmann::json entries = nlohmann::json::array();
  std::string pairs;
  for (std::size_t s = 0; s < s_count; ++s) {
    script_docs[scripts[s].id] = nlohmann::json::parse(serialize_script(scripts[s].script));
    entries.push_back({{"id", scripts[s].id}, {"pairs", o.per_script}, {"sha256", sha256_hex(chunks[s])}});
    pairs += chunks[s];
  }
  const std::string scripts_text = script_docs.dump(1) + "\n";

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_file(dir / "scripts.json", scripts_text);
  write_file(dir / "pairs.ndjson", pairs);
  nlohmann::json manifest = {{"version", 1},
                             {"seed", o.seed},
                             {"K", o.K},
                             {"per_script", o.per_script},
                             {"total_pairs", o.per_script * s_count},
                             {"params", params_to_json(o.params)},
                             {"scripts", entries},
                             {"files", {{"scripts.json", sha256_hex(scripts_text)}, {"pairs.ndjson", sha256_hex(pairs)}}}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

Corpus load_corpus(const std::string& dir) {
  const fs::path d(dir);
  Corpus c;
  try {
    c.manifest = nlohmann::json::parse(read_file(d / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw SyntaxError(std::string("bad corpus manifest: ") + e.what());
  }
  const std::string scripts_text = read_file(d / "scripts.json");
  const std::string pairs_text = read_file(d / "pairs.ndjson");
  try {
    if (sha256_hex(scripts_text) != c.manifest.at("files").at("scripts.json").get<std::string>() ||
        sha256_hex(pairs_text) != c.manifest.at("files").at("pairs.ndjson").get<std::string>()) {
      throw SyntaxError("corpus files do not match their manifest checksums");
    }
    const auto docs = nlohmann::json::parse(scripts_text);
    for (auto it = docs.begin(); it != docs.end(); ++it) c.scripts.emplace(it.key(), parse_script(it.value().dump()));
  } catch (const nlohmann::json::exception& e) {
    throw SyntaxError(std::string("bad corpus: ") + e.what());
  }
  std::istringstream lines(pairs_text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    try {
      c.pairs.push_back(pair_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw SyntaxError(std::string("bad corpus record: ") + e.what());
    }
    if (!c.scripts.count(c.pairs.back().script_id)) throw SyntaxError("pair names an unknown script");
  }
  if (c.pairs.size() != c.manifest.value("total_pairs", std::size_t{0})) {
    throw SyntaxError("corpus pair count disagrees with the manifest");
  }
  return c;
}

namespace {

std::vector<const TrainingPair*> split(const Corpus& c, bool held) {
  std::map<std::string, std::size_t> counts;
  for (const auto& p : c.pairs) ++counts[p.script_id];
  std::vector<const TrainingPair*> out;
  for (const auto& p : c.pairs) {
    const std::size_t n = counts[p.script_id];
    const std::size_t cut = n - n / 5;
    if ((p.index >= cut) == held) out.push_back(&p);
  }
  return out;
}

}  // namespace

std::vector<const TrainingPair*> Corpus::train_split() const { return split(*this, false); }
std::vector<const TrainingPair*> Corpus::held_out() const { return split(*this, true); }

}  // namespace storyline::training
