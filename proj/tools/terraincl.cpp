// Command-line front end: train, sweep, report, gen-terrain, validate.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "terraincl/experiment.hpp"

namespace {

using namespace terraincl;

struct RunOptions {
  std::string scenario;
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  bool full_scale = false;
  std::vector<std::string> overrides;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--scenario", o.scenario, "easy2hard | hard2easy")
      ->check(CLI::IsMember({"easy2hard", "hard2easy"}));
  cmd->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_flag("--full-scale", o.full_scale, "4096 training agents, 512 validation agents per terrain, 500-iteration phases");
  cmd->add_option("--set", o.overrides, "override one config key (key=value), repeatable");
  cmd->add_option("--out", o.out, "output directory")->required();
}

RunConfig resolve(const RunOptions& o) {
  RunConfig cfg = o.full_scale ? RunConfig::full_scale() : RunConfig{};
  if (!o.config.empty()) cfg = load_config_file(o.config, cfg);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.scenario.empty()) {
    cfg.scenario = o.scenario;
    cfg.phases.clear();
  }
  if (o.seed_set) cfg.seed = o.seed;
  cfg.out_dir = o.out;
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::logic_error&) {
      throw ConfigError("--seeds expects a comma-separated list of integers, got '" + text + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("--seeds is empty");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Terrain-incremental continual RL harness"};
  app.require_subcommand(1);

  RunOptions train_opts;
  auto* train = app.add_subcommand("train", "run one training/validation run");
  add_run_options(train, train_opts);
  train->add_option("--seed", train_opts.seed, "run seed")->each([&](const std::string&) { train_opts.seed_set = true; });

  RunOptions sweep_opts;
  std::string seeds_text = "1,2,3,4,5";
  auto* sweep_cmd = app.add_subcommand("sweep", "run several seeds and aggregate validation traces");
  add_run_options(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--seeds", seeds_text, "comma-separated seeds");

  std::string runs_dir, report_out;
  auto* report_cmd = app.add_subcommand("report", "summarize forgetting/transfer over completed runs");
  report_cmd->add_option("--runs", runs_dir, "directory containing runs")->required();
  report_cmd->add_option("--out", report_out, "write the markdown summary here instead of stdout");

  std::string kind_text, terrain_out, terrain_config;
  std::uint64_t terrain_seed = 0;
  auto* gen = app.add_subcommand("gen-terrain", "write a heightfield as CSV");
  gen->add_option("--kind", kind_text, "flat|slope_up|slope_down|stairs_up|stairs_down|tiles[+rough]")->required();
  gen->add_option("--seed", terrain_seed, "terrain seed");
  gen->add_option("--config", terrain_config, "config file with terrain.* keys")->check(CLI::ExistingFile);
  gen->add_option("--out", terrain_out, "CSV output path")->required();

  std::string checkpoint, probe_kind, probe_config;
  std::uint64_t probe_seed = 1;
  std::size_t probe_iterations = 10, probe_agents = 64;
  auto* validate = app.add_subcommand("validate", "probe a checkpoint on one terrain with learning switched off");
  validate->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  validate->add_option("--terrain", probe_kind, "terrain kind")->required();
  validate->add_option("--config", probe_config, "config file (env/terrain keys)")->check(CLI::ExistingFile);
  validate->add_option("--seed", probe_seed, "terrain and pool seed");
  validate->add_option("--iterations", probe_iterations, "validation windows to run");
  validate->add_option("--agents", probe_agents, "validation agents");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const RunConfig cfg = resolve(train_opts);
      RunHooks hooks;
      hooks.log = &std::cerr;
      const RunArtifacts art = run(cfg, hooks);
      if (!art.completed) {
        std::cerr << "error: run failed at iteration " << art.failed_iteration.value_or(0) << ": " << art.error << '\n';
        return 1;
      }
      std::cout << "completed " << art.iterations_run << " iterations in " << format_double(art.wall_clock_s)
                << " s; artifacts in " << art.out_dir << '\n';
    } else if (*sweep_cmd) {
      const RunConfig cfg = resolve(sweep_opts);
      RunHooks hooks;
      hooks.log = &std::cerr;
      const SweepResult r = sweep(cfg, parse_seeds(seeds_text), hooks);
      for (const auto& [seed, why] : r.failures) std::cerr << "seed " << seed << " failed: " << why << '\n';
      std::cout << r.completed_seeds.size() << " runs completed; aggregate in " << cfg.out_dir << "/aggregate.csv\n";
      if (r.completed_seeds.empty()) return 1;
    } else if (*report_cmd) {
      const auto summaries = summarize_runs(runs_dir);
      if (report_out.empty()) {
        write_report(std::cout, summaries);
      } else {
        std::ofstream os(report_out);
        if (!os) throw ConfigError("cannot open " + report_out);
        write_report(os, summaries);
      }
    } else if (*gen) {
      RunConfig cfg;
      if (!terrain_config.empty()) cfg = load_config_file(terrain_config);
      const HeightField f = generate(parse_kind(kind_text), cfg.terrain, terrain_seed);
      std::ofstream os(terrain_out);
      if (!os) throw ConfigError("cannot open " + terrain_out);
      write_csv(os, f);
    } else if (*validate) {
      RunConfig cfg;
      if (!probe_config.empty()) cfg = load_config_file(probe_config);
      CheckpointMeta meta;
      const Policy policy = load_checkpoint(checkpoint, &meta);
      const TerrainKind kind = parse_kind(probe_kind);
      auto patches = std::make_shared<const std::vector<TerrainPatch>>(std::vector<TerrainPatch>{
          make_patch(kind, generate(kind, cfg.terrain, derive_seed(probe_seed, "terrain", 0, 0)), cfg.env)});
      ValidationPool pool(cfg.env, patches, probe_agents, derive_seed(probe_seed, "validation"));
      ValidationMatrix m;
      m.kinds = {kind};
      for (std::size_t i = 0; i < probe_iterations; ++i) pool.run(&policy, cfg.ppo.steps_per_iteration, m);
      const auto ma = pool.window(0).moving_average();
      std::cout << "terrain = " << kind_name(kind) << '\n'
                << "checkpoint_iteration = " << meta.iteration << '\n'
                << "episodes_in_window = " << pool.window(0).size() << '\n'
                << "reward_ma = " << (ma ? format_double(*ma) : "unavailable") << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
