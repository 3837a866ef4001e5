#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "terraincl/experiment.hpp"

using namespace terraincl;
namespace fs = std::filesystem;

namespace {

using F = TerrainFamily;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("terraincl_test_" + name);
  fs::remove_all(p);
  return p;
}

// Eight two-iteration phases on the surrogate backend: seconds, not minutes.
RunConfig tiny(const std::string& scenario = "easy2hard") {
  RunConfig c;
  c.scenario = scenario;
  c.env.backend = Backend::Surrogate;
  c.num_train_agents = 8;
  c.agents_per_terrain_val = 2;
  c.phase_length = 2;
  c.ppo.epochs = 2;
  return c;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Config, DefaultsAndFullScale) {
  const RunConfig d;
  EXPECT_EQ(d.num_train_agents, 256u);
  EXPECT_EQ(d.agents_per_terrain_val, 64u);
  EXPECT_EQ(d.phase_length, 50u);
  const RunConfig p = RunConfig::full_scale();
  EXPECT_EQ(p.num_train_agents, 4096u);
  EXPECT_EQ(p.agents_per_terrain_val, 512u);
  EXPECT_EQ(p.phase_length, 500u);
  EXPECT_EQ(p.total_iterations(), 4000u);
}

TEST(Config, ParsesKeyValueLines) {
  RunConfig c;
  std::istringstream is(
      "# comment\n"
      "scenario = hard2easy\n"
      "seed = 42   # trailing comment\n"
      "\n"
      "ppo.gamma = 0.5\n"
      "backend = surrogate\n"
      "validation = false\n"
      "phases = flat, tiles+rough\n");
  parse_config(is, c);
  EXPECT_EQ(c.scenario, "hard2easy");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.ppo.gamma, 0.5);
  EXPECT_EQ(c.env.backend, Backend::Surrogate);
  EXPECT_FALSE(c.validation);
  ASSERT_EQ(c.phases.size(), 2u);
  EXPECT_EQ(c.phases[1], (TerrainKind{F::Tiles, true}));
  EXPECT_EQ(c.make_scenario().phases.size(), 2u);
}

TEST(Config, RejectsBadInput) {
  RunConfig c;
  EXPECT_THROW(set_config_value(c, "ppo.gama", "0.5"), ConfigError);
  EXPECT_THROW(set_config_value(c, "ppo.gamma", "half"), ConfigError);
  EXPECT_THROW(set_config_value(c, "seed", "-3"), ConfigError);
  EXPECT_THROW(set_config_value(c, "backend", "mujoco"), ConfigError);
  EXPECT_THROW(set_config_value(c, "default_joints", "1,2,3"), ConfigError);
  EXPECT_THROW(set_config_value(c, "phases", "flat,lava"), ConfigError);
  std::istringstream is("seed 4\n");
  EXPECT_THROW(parse_config(is, c), ConfigError);
  EXPECT_THROW(load_config_file("/nonexistent/terraincl.cfg"), ConfigError);

  RunConfig bad;
  bad.scenario = "sideways";
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.ppo.gamma = 1.5;
  EXPECT_THROW(bad.validate(), ParamError);
}

TEST(Config, WriteParseRoundTrip) {
  RunConfig c = tiny();
  c.seed = 77;
  c.ppo.learning_rate = 1.0 / 3.0;
  c.env.surrogate_targets[2][5] = 0.1 + 0.2;
  c.phases = {{F::StairsUp, false}, {F::Flat, true}};
  std::ostringstream first;
  write_config(first, c);
  RunConfig back;
  std::istringstream is(first.str());
  parse_config(is, back);
  std::ostringstream second;
  write_config(second, back);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(back.ppo.learning_rate, c.ppo.learning_rate);
  EXPECT_EQ(back.env.surrogate_targets, c.env.surrogate_targets);
  EXPECT_EQ(back.phases, c.phases);
}

TEST(Run, SmokeRunWritesArtifacts) {
  const fs::path dir = scratch("smoke");
  RunConfig c = tiny();
  c.out_dir = dir.string();
  const RunArtifacts art = run(c);
  ASSERT_TRUE(art.completed) << art.error;
  EXPECT_EQ(art.iterations_run, 16u);
  EXPECT_EQ(art.update_faults, 0u);
  for (const char* f : {"config.resolved.txt", "train_log.csv", "validation_matrix.csv", "transfer_report.txt",
                        "transfer_report.csv", "manifest.txt", "checkpoints/final.clqw"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  for (int p = 0; p < 8; ++p) EXPECT_TRUE(fs::exists(dir / "checkpoints" / ("phase_" + std::to_string(p) + ".clqw")));

  // One validation trace per terrain patch.
  ASSERT_EQ(art.validation.num_terrains(), 8u);
  EXPECT_EQ(art.validation.num_iterations(), 16u);
  ASSERT_TRUE(art.transfer.has_value());
  EXPECT_EQ(art.transfer->terrains.size(), 8u);

  const std::string log = slurp(dir / "train_log.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), kTrainLogHeader);
  EXPECT_EQ(count_lines(log), 1u + 16u * 9u);
  std::istringstream ls(log);
  std::string line;
  std::getline(ls, line);
  while (std::getline(ls, line)) ASSERT_EQ(split_csv_line(line).size(), 11u) << line;

  const std::string vm = slurp(dir / "validation_matrix.csv");
  EXPECT_EQ(count_lines(vm), 1u + 16u * 8u);
  std::ifstream vis(dir / "validation_matrix.csv");
  const ValidationMatrix back = read_validation_csv(vis);
  EXPECT_EQ(back.rows, art.validation.rows);

  const auto manifest = slurp(dir / "manifest.txt");
  EXPECT_NE(manifest.find("status = completed"), std::string::npos);
  EXPECT_NE(manifest.find("phase_boundaries = 2 4 6 8 10 12 14"), std::string::npos);

  const Policy last = load_checkpoint((dir / "checkpoints" / "final.clqw").string());
  EXPECT_TRUE(last == art.final_policy);
  fs::remove_all(dir);
}

TEST(Run, SameSeedGivesIdenticalFiles) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  RunConfig c = tiny("hard2easy");
  c.seed = 9;
  c.out_dir = a.string();
  run(c);
  c.out_dir = b.string();
  run(c);
  for (const char* f : {"train_log.csv", "validation_matrix.csv", "transfer_report.csv", "config.resolved.txt",
                        "checkpoints/final.clqw"}) {
    const std::string x = slurp(a / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(b / f)) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Run, ValidationNeverChangesTraining) {
  RunConfig on = tiny();
  RunConfig off = on;
  off.validation = false;
  const RunArtifacts x = run(on), y = run(off);
  EXPECT_TRUE(x.final_policy == y.final_policy);
  EXPECT_EQ(y.validation.num_iterations(), 0u);
  EXPECT_FALSE(y.transfer.has_value());
}

TEST(Run, HookCanStopEarly) {
  RunHooks hooks;
  std::vector<std::size_t> seen;
  hooks.on_iteration = [&](const IterationRecord& r, const ValidationMatrix& m, const Policy&) {
    seen.push_back(r.iteration);
    EXPECT_EQ(m.num_iterations(), r.iteration + 1);
    return r.iteration < 4;
  };
  const RunArtifacts art = run(tiny(), hooks);
  EXPECT_TRUE(art.completed);
  EXPECT_EQ(art.iterations_run, 5u);
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_FALSE(art.transfer.has_value());
}

TEST(Sweep, AggregateEnvelope) {
  ValidationMatrix a, b;
  a.kinds = b.kinds = {{F::Flat, false}};
  a.rows = {{1.0}, {std::nullopt}, {3.0}};
  b.rows = {{-1.0}, {5.0}};
  const SweepResult one = aggregate_matrices({a});
  EXPECT_EQ(*one.cells[0][0].mean, 1.0);
  EXPECT_EQ(*one.cells[0][0].min, 1.0);
  EXPECT_EQ(*one.cells[0][0].max, 1.0);
  EXPECT_FALSE(one.cells[1][0].mean.has_value());

  const SweepResult two = aggregate_matrices({a, b});
  ASSERT_EQ(two.cells.size(), 3u);
  EXPECT_EQ(*two.cells[0][0].mean, 0.0);
  EXPECT_EQ(*two.cells[0][0].min, -1.0);
  EXPECT_EQ(*two.cells[0][0].max, 1.0);
  EXPECT_EQ(two.cells[0][0].runs, 2u);
  EXPECT_EQ(*two.cells[1][0].mean, 5.0);
  EXPECT_EQ(two.cells[2][0].runs, 1u);
}

TEST(Sweep, RunsSeedsAndWritesAggregate) {
  const fs::path dir = scratch("sweep");
  RunConfig c = tiny();
  c.out_dir = dir.string();
  EXPECT_THROW(sweep(c, {}), ConfigError);
  const SweepResult r = sweep(c, {1, 2});
  EXPECT_EQ(r.completed_seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_TRUE(r.failures.empty());
  ASSERT_EQ(r.cells.size(), 16u);
  for (const auto& row : r.cells)
    for (const auto& cell : row)
      if (cell.mean) {
        EXPECT_LE(*cell.min, *cell.mean);
        EXPECT_GE(*cell.max, *cell.mean);
      }
  EXPECT_TRUE(fs::exists(dir / "aggregate.csv"));
  EXPECT_TRUE(fs::exists(dir / "seed_1" / "validation_matrix.csv"));
  EXPECT_TRUE(fs::exists(dir / "seed_2" / "validation_matrix.csv"));
  fs::remove_all(dir);
}

TEST(Report, EmptyDirectoryHasNoRuns) {
  const fs::path dir = scratch("report_empty");
  fs::create_directories(dir);
  try {
    summarize_runs(dir.string());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("no runs found"), std::string::npos);
  }
  EXPECT_THROW(summarize_runs((dir / "missing").string()), ConfigError);
  fs::remove_all(dir);
}

TEST(Report, RecomputesTransferAndShowsScenariosSideBySide) {
  const fs::path dir = scratch("report");
  RunConfig e2h = tiny("easy2hard");
  e2h.out_dir = (dir / "e2h").string();
  const RunArtifacts a = run(e2h);
  RunConfig h2e = tiny("hard2easy");
  h2e.out_dir = (dir / "h2e").string();
  run(h2e);

  const auto summaries = summarize_runs(dir.string());
  ASSERT_EQ(summaries.size(), 2u);
  EXPECT_EQ(summaries[0].scenario, "easy2hard");
  EXPECT_EQ(summaries[1].scenario, "hard2easy");
  ASSERT_EQ(summaries[0].runs.size(), 1u);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(summaries[0].forgetting[k], a.transfer->terrains[k].forgetting);
    EXPECT_EQ(summaries[0].backward_transfer[k], a.transfer->terrains[k].backward_transfer);
    EXPECT_EQ(summaries[0].forward_transfer[k], a.transfer->terrains[k].forward_transfer);
  }
  std::ostringstream os;
  write_report(os, summaries);
  const std::string md = os.str();
  EXPECT_NE(md.find("| easy2hard terrain | F | BWT | FWT | hard2easy terrain | F | BWT | FWT |"), std::string::npos);
  EXPECT_NE(md.find(kForgettingFormula), std::string::npos);
  EXPECT_EQ(count_lines(md.substr(md.find("|---"))), 9u + 1u + 2u * 3u + 2u);

  // A failed run is skipped, not averaged in.
  std::ofstream(dir / "h2e" / "manifest.txt") << "status = failed\n";
  EXPECT_EQ(summarize_runs(dir.string()).size(), 1u);
  fs::remove_all(dir);
}
