#include "storyline/agent/checkpoint.hpp"
#include "storyline/engine.hpp"
#include "storyline/render/svg.hpp"
#include "storyline/serialize.hpp"
#include "storyline/service/http.hpp"
#include "storyline/training/evaluate.hpp"
#include "storyline/training/trainer.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

using namespace storyline;
using nlohmann::json;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw SyntaxError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path);
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Storyline layout, agent training and authoring service"};
  app.require_subcommand(1);

  std::string script_path, constraints_path, params_path, out_path;
  auto* layout_cmd = app.add_subcommand("layout", "Lay out a script");
  layout_cmd->add_option("script", script_path, "Script JSON")->required();
  layout_cmd->add_option("--constraints", constraints_path, "JSON array of narrative constraints");
  layout_cmd->add_option("--params", params_path, "Layout parameters JSON");
  layout_cmd->add_option("-o,--output", out_path, "Output file (stdout by default)");

  std::string layout_path, render_script;
  int width = 960, height = 540;
  bool no_labels = false, straight = false;
  auto* render_cmd = app.add_subcommand("render", "Render a layout JSON to SVG");
  render_cmd->add_option("layout", layout_path, "Layout JSON")->required();
  render_cmd->add_option("-o,--output", out_path, "SVG file")->required();
  render_cmd->add_option("--script", render_script, "Script JSON for character labels");
  render_cmd->add_option("--width", width)->check(CLI::PositiveNumber);
  render_cmd->add_option("--height", height)->check(CLI::PositiveNumber);
  render_cmd->add_flag("--no-labels", no_labels);
  render_cmd->add_flag("--no-smoothing", straight, "Straight joints instead of cubic easing");

  std::string scripts_dir, corpus_dir;
  training::CorpusOptions corpus_opts;
  auto* datagen_cmd = app.add_subcommand("datagen", "Generate an (origin, user) training corpus");
  datagen_cmd->add_option("--scripts", scripts_dir, "Directory of script JSON files")->required();
  datagen_cmd->add_option("--per-script", corpus_opts.per_script, "Pairs per script")->required();
  datagen_cmd->add_option("--seed", corpus_opts.seed, "Seed")->required();
  datagen_cmd->add_option("-o,--output", corpus_dir, "Corpus directory")->required();
  datagen_cmd->add_option("-K,--steps", corpus_opts.K, "Constraints per user layout");
  datagen_cmd->add_option("--threads", corpus_opts.threads, "Worker threads")->check(CLI::PositiveNumber);

  training::TrainRunConfig train_cfg;
  std::string log_path;
  auto* train_cmd = app.add_subcommand("train", "Train the agent with asynchronous actor-critic");
  train_cmd->add_option("--corpus", train_cfg.corpus_path, "Corpus directory")->required();
  train_cmd->add_option("--workers", train_cfg.workers, "Actor-learner threads")->required();
  train_cmd->add_option("--episodes", train_cfg.episodes, "Training episodes")->required();
  train_cmd->add_option("-o,--output", train_cfg.output, "Checkpoint path")->required();
  train_cmd->add_option("--lr-pi", train_cfg.lr_pi, "Policy learning rate");
  train_cmd->add_option("--lr-v", train_cfg.lr_v, "Value learning rate");
  train_cmd->add_option("--adam", train_cfg.adam_rate, "Adam step size (0 = plain gradient steps)");
  train_cmd->add_option("--entropy", train_cfg.update.entropy, "Entropy bonus weight");
  train_cmd->add_flag("--normalize-advantage", train_cfg.update.normalize_advantage);
  train_cmd->add_option("--max-step-norm", train_cfg.update.max_step_norm);
  train_cmd->add_option("--gamma", train_cfg.episode.reward.gamma);
  train_cmd->add_option("-K,--steps", train_cfg.episode.K);
  train_cmd->add_option("--seed", train_cfg.seed);
  train_cmd->add_option("--checkpoint-every", train_cfg.checkpoint_every);
  train_cmd->add_option("--widths", train_cfg.widths, "Trunk layer widths");
  train_cmd->add_option("--log", log_path, "Training log JSON");

  std::string ckpt_path, report_path, split = "held-out";
  training::EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Compare the agent with the greedy random-search baseline");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  eval_cmd->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  eval_cmd->add_option("--report", report_path, "Report JSON")->required();
  eval_cmd->add_option("--candidates", eval_opts.baseline_candidates, "Baseline candidates per step");
  eval_cmd->add_option("--trials", eval_opts.trials, "Baseline runs per pair");
  eval_cmd->add_option("--seed", eval_opts.seed);
  eval_cmd->add_option("--threads", eval_opts.threads)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--split", split, "held-out, train or all")
      ->check(CLI::IsMember({"held-out", "train", "all"}));

  int port = 8080;
  std::string host = "127.0.0.1", snapshot_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Run the authoring HTTP service");
  serve_cmd->add_option("--port", port)->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--ckpt", ckpt_path, "Checkpoint (default: $STORYLINE_CKPT)");
  serve_cmd->add_option("--snapshot-dir", snapshot_dir, "Directory for session snapshots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (auto* sub : app.get_subcommands()) failed = sub;
    std::cerr << failed->help();
    return 2;
  }

  try {
    if (*layout_cmd) {
      const StoryScript script = load_script_file(script_path);
      const auto constraints =
          constraints_path.empty() ? std::vector<NarrativeConstraint>{} : constraints_from_json(read_json(constraints_path));
      const LayoutParams params = params_path.empty() ? LayoutParams{} : params_from_json(read_json(params_path));
      write_text(out_path, layout_to_json(layout(script, constraints, params)).dump(2) + "\n");
    } else if (*render_cmd) {
      const Layout l = layout_from_json(read_json(layout_path));
      render::RenderOptions o;
      o.width = width;
      o.height = height;
      o.show_labels = !no_labels;
      o.smoothing = straight ? render::Smoothing::kNone : render::Smoothing::kCubic;
      if (!render_script.empty()) {
        for (const auto& c : load_script_file(render_script).characters) o.labels.push_back(c.name);
      }
      write_text(out_path, render::to_svg(l, o));
    } else if (*datagen_cmd) {
      const json manifest = training::build_corpus(training::load_scripts_dir(scripts_dir), corpus_opts, corpus_dir);
      std::cout << manifest.dump(2) << "\n";
    } else if (*train_cmd) {
      const training::Corpus corpus = training::load_corpus(train_cfg.corpus_path);
      const auto result = training::train(train_cfg, corpus, nullptr, [&](const training::EpisodeRecord& r) {
        if ((r.episode + 1) % 50 == 0) {
          std::cerr << "episode " << r.episode + 1 << " final loss " << r.final_loss << " (" << r.wall_clock
                    << " s)\n";
        }
      });
      if (!log_path.empty()) write_text(log_path, result.log.to_json().dump(1) + "\n");
      std::cerr << "trained " << train_cfg.episodes << " episodes in " << result.log.seconds << " s, "
                << result.log.skipped << " skipped\n";
    } else if (*eval_cmd) {
      const agent::Checkpoint ck = agent::load_checkpoint(ckpt_path);
      const training::Corpus corpus = training::load_corpus(corpus_dir);
      std::vector<const training::TrainingPair*> pairs;
      if (split == "held-out") pairs = corpus.held_out();
      if (split == "train") pairs = corpus.train_split();
      if (split == "all") {
        for (const auto& p : corpus.pairs) pairs.push_back(&p);
      }
      eval_opts.episode = ck.episode;
      const auto report = training::evaluate(ck.policy, pairs, corpus.scripts, eval_opts);
      write_text(report_path, report.to_json().dump(1) + "\n");
      std::cout << "agent mean " << report.agent_mean << ", baseline mean " << report.baseline_mean << ", win rate "
                << report.win_rate << " over " << report.pairs.size() << " pairs\n";
    } else if (*serve_cmd) {
      if (ckpt_path.empty()) {
        if (const char* env = std::getenv("STORYLINE_CKPT")) ckpt_path = env;
      }
      std::optional<agent::Checkpoint> model;
      if (!ckpt_path.empty()) model = agent::load_checkpoint(ckpt_path);
      service::AuthoringService svc(std::move(model), {snapshot_dir});
      service::HttpServer server(svc);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << host << ":" << port << (svc.model_loaded() ? "" : " (no model loaded)") << "\n";
      if (!server.listen(host, port)) {
        std::cerr << "cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
