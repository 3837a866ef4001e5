#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "terraincl/curriculum.hpp"
#include "terraincl/env.hpp"
#include "terraincl/error.hpp"
#include "terraincl/evaluation.hpp"
#include "terraincl/policy.hpp"
#include "terraincl/ppo.hpp"
#include "terraincl/rng.hpp"
#include "terraincl/terrain.hpp"

namespace terraincl {

inline constexpr const char* kCodeVersion = "terraincl 0.1.0";

// Scale used by the original experiments.
inline constexpr std::size_t kFullTrainAgents = 4096;
inline constexpr std::size_t kFullValAgentsPerTerrain = 512;
inline constexpr std::size_t kFullPhaseLength = 500;
inline constexpr std::size_t kFullIterations = 4000;
inline constexpr std::size_t kFullRuns = 5;

struct RunConfig {
  std::string scenario = "easy2hard";
  std::vector<TerrainKind> phases;  // explicit phase list; overrides `scenario` when non-empty
  std::uint64_t seed = 1;
  std::size_t num_train_agents = 256;
  std::size_t agents_per_terrain_val = 64;
  std::size_t phase_length = 50;
  bool validation = true;
  EnvConfig env;
  PpoConfig ppo;
  TerrainParams terrain;
  std::string out_dir;

  static RunConfig full_scale() {
    RunConfig c;
    c.num_train_agents = kFullTrainAgents;
    c.agents_per_terrain_val = kFullValAgentsPerTerrain;
    c.phase_length = kFullPhaseLength;
    return c;
  }

  Scenario make_scenario() const {
    if (!phases.empty()) return custom_scenario(scenario, phases, phase_length);
    return build_scenario(scenario, phase_length);
  }

  std::size_t total_iterations() const { return make_scenario().total_iterations(); }

  void validate() const {
    if (num_train_agents == 0) throw ConfigError("config: num_train_agents must be > 0");
    if (validation && agents_per_terrain_val == 0) throw ConfigError("config: agents_per_terrain_val must be > 0");
    if (phase_length == 0) throw ConfigError("config: phase_length must be > 0");
    make_scenario();
    env.validate();
    ppo.validate();
    terrain.validate();
  }
};

// ---- key = value config files ---------------------------------------------

template <typename Visitor>
void visit_config(RunConfig& c, Visitor&& v) {
  v("scenario", c.scenario);
  v("phases", c.phases);
  v("seed", c.seed);
  v("num_train_agents", c.num_train_agents);
  v("agents_per_terrain_val", c.agents_per_terrain_val);
  v("phase_length", c.phase_length);
  v("validation", c.validation);

  EnvConfig& e = c.env;
  v("backend", e.backend);
  v("dt_s", e.dt_s);
  v("episode_cap_s", e.episode_cap_s);
  v("command.vx_min", e.commands.vx_min);
  v("command.vx_max", e.commands.vx_max);
  v("command.vy_min", e.commands.vy_min);
  v("command.vy_max", e.commands.vy_max);
  v("command.yaw_rate_min", e.commands.yaw_rate_min);
  v("command.yaw_rate_max", e.commands.yaw_rate_max);
  v("reward.w_lin", e.reward.w_lin);
  v("reward.w_ang", e.reward.w_ang);
  v("reward.sigma_lin", e.reward.sigma_lin);
  v("reward.sigma_ang", e.reward.sigma_ang);
  v("reward.c_action", e.reward.c_action);
  v("reward.c_jvel", e.reward.c_jvel);
  v("reward.c_fall", e.reward.c_fall);
  v("default_joints", e.default_joints);
  v("joint_lower", e.joint_lower);
  v("joint_upper", e.joint_upper);
  v("joint_rate_max", e.joint_rate_max);
  v("thigh_length_m", e.thigh_length_m);
  v("shank_length_m", e.shank_length_m);
  v("hip_offset_x_m", e.hip_offset_x_m);
  v("hip_offset_y_m", e.hip_offset_y_m);
  v("contact_tolerance_m", e.contact_tolerance_m);
  v("z_relax_rate", e.z_relax_rate);
  v("fall_rate", e.fall_rate);
  v("max_air_time_s", e.max_air_time_s);
  v("min_base_clearance_m", e.min_base_clearance_m);
  v("spawn_jitter_m", e.spawn_jitter_m);
  v("lin_vel_scale", e.lin_vel_scale);
  v("ang_vel_scale", e.ang_vel_scale);
  v("joint_vel_scale", e.joint_vel_scale);
  v("height_clip_m", e.height_clip_m);
  v("scan_spacing_m", e.scan_spacing_m);
  v("surrogate_episode_steps", e.surrogate_episode_steps);
  v("surrogate_noise", e.surrogate_noise);
  for (std::size_t f = 0; f < kNumFamilies; ++f)
    v("surrogate_target." + std::string(family_name(static_cast<TerrainFamily>(f))), e.surrogate_targets[f]);

  PpoConfig& p = c.ppo;
  v("ppo.steps_per_iteration", p.steps_per_iteration);
  v("ppo.num_minibatches", p.num_minibatches);
  v("ppo.epochs", p.epochs);
  v("ppo.clip_ratio", p.clip_ratio);
  v("ppo.gamma", p.gamma);
  v("ppo.gae_lambda", p.gae_lambda);
  v("ppo.learning_rate", p.learning_rate);
  v("ppo.value_coef", p.value_coef);
  v("ppo.entropy_coef", p.entropy_coef);
  v("ppo.max_grad_norm", p.max_grad_norm);

  TerrainParams& t = c.terrain;
  v("terrain.patch_length_m", t.patch_length_m);
  v("terrain.patch_width_m", t.patch_width_m);
  v("terrain.cell_size_m", t.cell_size_m);
  v("terrain.slope_grade", t.slope_grade);
  v("terrain.step_run_m", t.step_run_m);
  v("terrain.step_height_m", t.step_height_m);
  v("terrain.tile_cell_m", t.tile_cell_m);
  v("terrain.tile_height_max_m", t.tile_height_max_m);
  v("terrain.rough_amplitude_m", t.rough_amplitude_m);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ValueWriter {
  std::ostream& os;
  void operator()(const std::string& key, const std::string& v) const { os << key << " = " << v << '\n'; }
  void operator()(const std::string& key, const std::vector<TerrainKind>& v) const {
    os << key << " =";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : " ") << kind_name(v[i]);
    os << '\n';
  }
  void operator()(const std::string& key, const std::uint64_t& v) const { os << key << " = " << v << '\n'; }
  void operator()(const std::string& key, const double& v) const { os << key << " = " << format_exact(v) << '\n'; }
  void operator()(const std::string& key, const bool& v) const {
    os << key << " = " << (v ? "true" : "false") << '\n';
  }
  void operator()(const std::string& key, const Backend& v) const {
    os << key << " = " << (v == Backend::Walker ? "walker" : "surrogate") << '\n';
  }
  void operator()(const std::string& key, const JointVec& v) const {
    os << key << " = ";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << format_exact(v[i]);
    os << '\n';
  }
};

struct ValueSetter {
  const std::string& key;
  const std::string& value;
  bool& matched;

  void fail(const char* what) const {
    throw ConfigError("config: key '" + key + "' expects " + what + ", got '" + value + "'");
  }
  bool hit(const std::string& k) const { return !matched && k == key; }

  void operator()(const std::string& k, std::string& v) const {
    if (!hit(k)) return;
    v = value;
    matched = true;
  }
  void operator()(const std::string& k, std::vector<TerrainKind>& v) const {
    if (!hit(k)) return;
    v.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) v.push_back(parse_kind(item));
    }
    matched = true;
  }
  void operator()(const std::string& k, std::uint64_t& v) const {
    if (!hit(k)) return;
    std::size_t pos = 0;
    try {
      if (!value.empty() && value[0] == '-') fail("a non-negative integer");
      v = std::stoull(value, &pos);
    } catch (const std::logic_error&) {
      fail("a non-negative integer");
    }
    if (pos != value.size()) fail("a non-negative integer");
    matched = true;
  }
  void operator()(const std::string& k, double& v) const {
    if (!hit(k)) return;
    v = parse_double(value);
    matched = true;
  }
  void operator()(const std::string& k, bool& v) const {
    if (!hit(k)) return;
    if (value == "true" || value == "1") v = true;
    else if (value == "false" || value == "0") v = false;
    else fail("true|false");
    matched = true;
  }
  void operator()(const std::string& k, Backend& v) const {
    if (!hit(k)) return;
    if (value == "walker") v = Backend::Walker;
    else if (value == "surrogate") v = Backend::Surrogate;
    else fail("walker|surrogate");
    matched = true;
  }
  void operator()(const std::string& k, JointVec& v) const {
    if (!hit(k)) return;
    std::stringstream ss(value);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
      if (i >= v.size()) fail("12 comma-separated numbers");
      v[i++] = parse_double(trim(item));
    }
    if (i != v.size()) fail("12 comma-separated numbers");
    matched = true;
  }

  double parse_double(const std::string& s) const {
    std::size_t pos = 0;
    double d = 0.0;
    try {
      d = std::stod(s, &pos);
    } catch (const std::logic_error&) {
      fail("a number");
    }
    if (pos != s.size()) fail("a number");
    return d;
  }
};

}  // namespace detail

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  bool matched = false;
  visit_config(cfg, detail::ValueSetter{key, value, matched});
  if (!matched) throw ConfigError("config: unknown key '" + key + "'");
}

inline void parse_config(std::istream& is, RunConfig& cfg) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline RunConfig load_config_file(const std::string& path, RunConfig cfg = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  parse_config(is, cfg);
  return cfg;
}

inline void write_config(std::ostream& os, RunConfig cfg) {
  os << "# resolved configuration\n";
  visit_config(cfg, detail::ValueWriter{os});
}

// ---- single run -------------------------------------------------------------

inline std::vector<TerrainPatch> build_patches(const RunConfig& cfg, const Scenario& s) {
  std::vector<TerrainPatch> patches;
  patches.reserve(s.phases.size());
  for (std::size_t p = 0; p < s.phases.size(); ++p) {
    const TerrainKind kind = s.phases[p].kind;
    const std::uint64_t kind_index = static_cast<std::uint64_t>(kind.family) * 2 + (kind.rough ? 1 : 0);
    const std::uint64_t seed = derive_seed(cfg.seed, "terrain", kind_index, p);
    patches.push_back(make_patch(kind, generate(kind, cfg.terrain, seed), cfg.env));
  }
  return patches;
}

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t phase = 0;
  std::optional<double> train_reward_ma;
  std::size_t train_episodes = 0;
  UpdateStats update;
};

struct RunHooks {
  // Return false to stop the run after this iteration (treated as completed).
  std::function<bool(const IterationRecord&, const ValidationMatrix&, const Policy&)> on_iteration;
  std::ostream* log = nullptr;
};

struct RunArtifacts {
  std::string out_dir;
  bool completed = false;
  std::size_t iterations_run = 0;
  std::optional<std::size_t> failed_iteration;
  std::string error;
  std::size_t update_faults = 0;
  Scenario scenario;
  ValidationMatrix validation;
  std::optional<TransferReport> transfer;
  Policy final_policy;
  double wall_clock_s = 0.0;
};

namespace detail {

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + p.string() + " for writing");
  return os;
}

}  // namespace detail

inline constexpr const char* kTrainLogHeader =
    "iteration,phase,terrain,split,reward_ma,episodes_terminated,loss_actor,loss_value,entropy,clip_fraction,"
    "approx_kl";

// Train/validate loop. Per iteration: collect a rollout on the current phase's
// terrain, compute advantages, update, then validate the policy as it was
// before this iteration's update (the snapshot saved at the previous one).
inline RunArtifacts run(const RunConfig& cfg, const RunHooks& hooks = {}) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::string started_at = detail::timestamp_utc();
  cfg.validate();
  namespace fs = std::filesystem;

  RunArtifacts art;
  art.out_dir = cfg.out_dir;
  art.scenario = cfg.make_scenario();
  const Scenario& scenario = art.scenario;
  const bool persist = !cfg.out_dir.empty();
  const fs::path out(cfg.out_dir);

  std::ofstream train_log;
  if (persist) {
    fs::create_directories(out / "checkpoints");
    {
      auto os = detail::open_out(out / "config.resolved.txt");
      write_config(os, cfg);
    }
    train_log = detail::open_out(out / "train_log.csv");
    train_log << kTrainLogHeader << '\n';
  }

  auto write_manifest = [&](const std::string& status) {
    if (!persist) return;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    auto os = detail::open_out(out / "manifest.txt");
    os << "status = " << status << '\n'
       << "code_version = " << kCodeVersion << '\n'
       << "scenario = " << scenario.name << '\n'
       << "seed = " << cfg.seed << '\n'
       << "iterations_planned = " << scenario.total_iterations() << '\n'
       << "iterations_run = " << art.iterations_run << '\n'
       << "update_faults = " << art.update_faults << '\n';
    if (art.failed_iteration) os << "failed_iteration = " << *art.failed_iteration << '\n';
    if (!art.error.empty()) os << "error = " << art.error << '\n';
    os << "phase_boundaries =";
    for (std::size_t p = 0; p + 1 < scenario.phases.size(); ++p) os << ' ' << scenario.phase_end(p) + 1;
    os << '\n' << "started_at = " << started_at << '\n';
    if (status != "running") os << "finished_at = " << detail::timestamp_utc() << '\n';
    os << "wall_clock_s = " << format_double(secs) << '\n';
  };
  write_manifest("running");

  auto patches = std::make_shared<const std::vector<TerrainPatch>>(build_patches(cfg, scenario));
  art.validation.kinds.clear();
  for (const auto& ph : scenario.phases) art.validation.kinds.push_back(ph.kind);
  for (std::size_t p = 0; p < scenario.phases.size(); ++p) art.validation.phase_ends.push_back(scenario.phase_end(p));

  Policy policy;
  policy.initialize(derive_seed(cfg.seed, "policy_init"));
  VecEnv train_env(cfg.env, patches, cfg.num_train_agents, derive_seed(cfg.seed, "train_env"));
  train_env.reset_all(0);
  std::vector<CounterRng> action_rngs(cfg.num_train_agents);
  for (std::size_t i = 0; i < action_rngs.size(); ++i)
    action_rngs[i] = CounterRng(derive_seed(cfg.seed, "train_actions", i));
  PpoLearner learner(policy, cfg.ppo, derive_seed(cfg.seed, "minibatch"));
  std::optional<ValidationPool> pool;
  if (cfg.validation)
    pool.emplace(cfg.env, patches, cfg.agents_per_terrain_val, derive_seed(cfg.seed, "validation"));

  RolloutBuffer buffer(cfg.num_train_agents, cfg.ppo.steps_per_iteration);
  EpisodeWindow train_window;
  std::size_t current_phase = 0;
  std::size_t iteration = 0;
  try {
    for (; iteration < scenario.total_iterations(); ++iteration) {
      const PhasePosition pos = phase_at(scenario, iteration);
      if (pos.index != current_phase) {
        on_phase_change(train_env, pos.index);
        current_phase = pos.index;
        if (hooks.log) *hooks.log << "phase " << pos.index << " (" << kind_name(pos.kind) << ") starts at iteration "
                                  << iteration << '\n';
      }
      const Policy snapshot = policy;

      IterationRecord rec;
      rec.iteration = iteration;
      rec.phase = pos.index;
      collect_rollout(policy, train_env, buffer, action_rngs, [&](std::size_t, double total) {
        train_window.push(total);
        ++rec.train_episodes;
      });
      const AdvantageSet adv = compute_gae(buffer, cfg.ppo);
      rec.update = learner.update(buffer, adv);
      if (rec.update.faulted) {
        ++art.update_faults;
        if (hooks.log) *hooks.log << "iteration " << iteration << ": " << rec.update.fault << '\n';
      }
      rec.train_reward_ma = train_window.moving_average();

      if (pool) {
        pool->run(&snapshot, cfg.ppo.steps_per_iteration, art.validation);
      }
      ++art.iterations_run;

      if (persist) {
        const auto& u = rec.update;
        train_log << iteration << ',' << pos.index << ',' << terrain_label(pos.index, pos.kind) << ",train,"
                  << format_optional(rec.train_reward_ma) << ',' << rec.train_episodes << ','
                  << format_double(u.loss_actor) << ',' << format_double(u.loss_value) << ','
                  << format_double(u.entropy) << ',' << format_double(u.clip_fraction) << ','
                  << format_double(u.approx_kl) << '\n';
        if (pool) {
          const auto& row = art.validation.rows.back();
          for (std::size_t k = 0; k < pool->num_terrains(); ++k) {
            train_log << iteration << ',' << pos.index << ',' << terrain_label(k, art.validation.kinds[k])
                      << ",val," << format_optional(row[k]) << ',' << pool->last_episode_count(k) << ",,,,,\n";
          }
        }
        if (iteration == scenario.phase_end(pos.index)) {
          const CheckpointMeta meta{iteration, cfg.seed, scenario.name};
          save_checkpoint((out / "checkpoints" / ("phase_" + std::to_string(pos.index) + ".clqw")).string(), policy,
                          meta);
        }
      }
      if (hooks.on_iteration && !hooks.on_iteration(rec, art.validation, policy)) {
        ++iteration;
        break;
      }
    }
  } catch (const std::exception& e) {
    art.failed_iteration = iteration;
    art.error = e.what();
    art.final_policy = policy;
    write_manifest("failed");
    art.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return art;
  }

  art.completed = true;
  art.final_policy = policy;
  if (pool && art.validation.num_iterations() >= scenario.total_iterations()) {
    art.transfer = transfer_metrics(art.validation, scenario);
    art.transfer->seed = cfg.seed;
  }
  if (persist) {
    train_log.close();
    save_checkpoint((out / "checkpoints" / "final.clqw").string(), policy,
                    {art.iterations_run, cfg.seed, scenario.name});
    if (pool) {
      auto os = detail::open_out(out / "validation_matrix.csv");
      write_validation_csv(os, art.validation);
    }
    if (art.transfer) {
      auto txt = detail::open_out(out / "transfer_report.txt");
      write_transfer_text(txt, *art.transfer);
      auto csv = detail::open_out(out / "transfer_report.csv");
      write_transfer_csv(csv, *art.transfer);
    }
  }
  write_manifest("completed");
  art.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return art;
}

// ---- sweeps -----------------------------------------------------------------

struct AggregateCell {
  std::optional<double> mean, min, max;
  std::size_t runs = 0;
};

struct SweepResult {
  std::vector<std::uint64_t> completed_seeds;
  std::vector<std::pair<std::uint64_t, std::string>> failures;
  std::vector<TerrainKind> kinds;
  std::vector<std::vector<AggregateCell>> cells;  // [iteration][terrain]
};

// Mean with min-max envelope per (iteration, terrain) over the runs whose
// entry is present.
inline SweepResult aggregate_matrices(const std::vector<ValidationMatrix>& runs) {
  SweepResult r;
  if (runs.empty()) return r;
  r.kinds = runs.front().kinds;
  std::size_t iters = 0;
  for (const auto& m : runs) iters = std::max(iters, m.num_iterations());
  r.cells.assign(iters, std::vector<AggregateCell>(r.kinds.size()));
  for (std::size_t t = 0; t < iters; ++t) {
    for (std::size_t k = 0; k < r.kinds.size(); ++k) {
      AggregateCell& c = r.cells[t][k];
      double sum = 0.0;
      for (const auto& m : runs) {
        const auto v = m.at(t, k);
        if (!v) continue;
        sum += *v;
        c.min = c.min ? std::min(*c.min, *v) : *v;
        c.max = c.max ? std::max(*c.max, *v) : *v;
        ++c.runs;
      }
      if (c.runs) c.mean = sum / static_cast<double>(c.runs);
    }
  }
  return r;
}

inline void write_aggregate_csv(std::ostream& os, const SweepResult& r) {
  os << "iteration,terrain,mean,min,max,runs\n";
  for (std::size_t t = 0; t < r.cells.size(); ++t)
    for (std::size_t k = 0; k < r.kinds.size(); ++k) {
      const auto& c = r.cells[t][k];
      os << t << ',' << terrain_label(k, r.kinds[k]) << ',' << format_optional(c.mean) << ','
         << format_optional(c.min) << ',' << format_optional(c.max) << ',' << c.runs << '\n';
    }
}

// Runs every seed into <out>/seed_<n>/ and writes <out>/aggregate.csv.
inline SweepResult sweep(const RunConfig& base, const std::vector<std::uint64_t>& seeds, const RunHooks& hooks = {}) {
  if (seeds.empty()) throw ConfigError("sweep: at least one seed required");
  namespace fs = std::filesystem;
  std::vector<ValidationMatrix> matrices;
  std::vector<std::uint64_t> completed;
  std::vector<std::pair<std::uint64_t, std::string>> failures;
  for (std::uint64_t s : seeds) {
    RunConfig cfg = base;
    cfg.seed = s;
    if (!base.out_dir.empty()) cfg.out_dir = (fs::path(base.out_dir) / ("seed_" + std::to_string(s))).string();
    RunArtifacts art;
    try {
      art = run(cfg, hooks);
    } catch (const std::exception& e) {
      failures.emplace_back(s, e.what());
      continue;
    }
    if (!art.completed) {
      failures.emplace_back(s, art.error);
      continue;
    }
    completed.push_back(s);
    matrices.push_back(std::move(art.validation));
  }
  SweepResult r = aggregate_matrices(matrices);
  r.completed_seeds = std::move(completed);
  r.failures = std::move(failures);
  if (!base.out_dir.empty()) {
    fs::create_directories(base.out_dir);
    auto os = detail::open_out(fs::path(base.out_dir) / "aggregate.csv");
    write_aggregate_csv(os, r);
    auto ms = detail::open_out(fs::path(base.out_dir) / "sweep_manifest.txt");
    ms << "completed_seeds =";
    for (auto s : r.completed_seeds) ms << ' ' << s;
    ms << '\n';
    for (const auto& [s, why] : r.failures) ms << "failed_seed." << s << " = " << why << '\n';
  }
  return r;
}

// ---- report -----------------------------------------------------------------

struct ScenarioSummary {
  std::string scenario;
  std::vector<std::string> runs;  // run directories
  std::vector<std::string> labels;
  // Per terrain: mean over runs of each metric (absent when no run has it).
  std::vector<std::optional<double>> forgetting, backward_transfer, forward_transfer;
  std::vector<std::string> aggregate_csvs;
};

namespace detail {

inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& p) {
  std::map<std::string, std::string> kv;
  std::ifstream is(p);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::string fmt_metric(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

}  // namespace detail

// Finds completed runs under `runs_dir` and recomputes transfer metrics from
// each run's raw validation CSV.
inline std::vector<ScenarioSummary> summarize_runs(const std::string& runs_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(runs_dir)) throw ConfigError("report: " + runs_dir + " is not a directory");
  std::vector<fs::path> dirs;
  std::vector<std::string> aggregates;
  for (const auto& entry : fs::recursive_directory_iterator(runs_dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename() == "manifest.txt") dirs.push_back(entry.path().parent_path());
    if (entry.path().filename() == "aggregate.csv") aggregates.push_back(entry.path().string());
  }
  std::sort(dirs.begin(), dirs.end());
  std::sort(aggregates.begin(), aggregates.end());

  std::map<std::string, std::vector<std::pair<std::string, TransferReport>>> by_scenario;
  std::vector<std::string> skipped;
  for (const auto& d : dirs) {
    const auto manifest = detail::read_key_values(d / "manifest.txt");
    const auto status = manifest.find("status");
    if (status == manifest.end() || status->second != "completed" || !fs::exists(d / "validation_matrix.csv") ||
        !fs::exists(d / "config.resolved.txt")) {
      skipped.push_back(d.string());
      continue;
    }
    const RunConfig cfg = load_config_file((d / "config.resolved.txt").string());
    const Scenario scenario = cfg.make_scenario();
    std::ifstream is(d / "validation_matrix.csv");
    const ValidationMatrix m = read_validation_csv(is);
    if (m.num_iterations() < scenario.total_iterations()) {
      skipped.push_back(d.string());
      continue;
    }
    by_scenario[scenario.name].emplace_back(d.string(), transfer_metrics(m, scenario));
  }
  if (by_scenario.empty()) {
    std::string msg = "report: no runs found in " + runs_dir;
    if (!skipped.empty()) {
      msg += " (incomplete or failed:";
      for (const auto& s : skipped) msg += " " + s;
      msg += ")";
    }
    throw ConfigError(msg);
  }

  std::vector<ScenarioSummary> out;
  for (const auto& [name, runs] : by_scenario) {
    ScenarioSummary s;
    s.scenario = name;
    const std::size_t nk = runs.front().second.terrains.size();
    for (const auto& t : runs.front().second.terrains) s.labels.push_back(t.label);
    auto mean_of = [&](std::size_t k, auto member) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& [dir, rep] : runs)
        if (k < rep.terrains.size())
          if (const auto& v = rep.terrains[k].*member) {
            sum += *v;
            ++n;
          }
      return n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt;
    };
    for (std::size_t k = 0; k < nk; ++k) {
      s.forgetting.push_back(mean_of(k, &TerrainTransfer::forgetting));
      s.backward_transfer.push_back(mean_of(k, &TerrainTransfer::backward_transfer));
      s.forward_transfer.push_back(mean_of(k, &TerrainTransfer::forward_transfer));
    }
    for (const auto& [dir, rep] : runs) s.runs.push_back(dir);
    for (const auto& a : aggregates) {
      for (const auto& dir : s.runs)
        if (fs::path(dir).parent_path() == fs::path(a).parent_path()) {
          s.aggregate_csvs.push_back(a);
          break;
        }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Markdown table of F/BWT/FWT per terrain; scenarios side by side.
inline void write_report(std::ostream& os, const std::vector<ScenarioSummary>& summaries) {
  os << "# Transfer summary\n\n";
  os << "Metrics are means over runs. " << kForgettingFormula << "; " << kBwtFormula << "; " << kFwtFormula
     << ".\n\n";
  os << '|';
  for (const auto& s : summaries) os << " " << s.scenario << " terrain | F | BWT | FWT |";
  os << "\n|";
  for (std::size_t i = 0; i < summaries.size(); ++i) os << "---|---:|---:|---:|";
  os << '\n';
  std::size_t rows = 0;
  for (const auto& s : summaries) rows = std::max(rows, s.labels.size());
  for (std::size_t k = 0; k < rows; ++k) {
    os << '|';
    for (const auto& s : summaries) {
      if (k < s.labels.size()) {
        os << ' ' << s.labels[k] << " | " << detail::fmt_metric(s.forgetting[k]) << " | "
           << detail::fmt_metric(s.backward_transfer[k]) << " | " << detail::fmt_metric(s.forward_transfer[k])
           << " |";
      } else {
        os << " | | | |";
      }
    }
    os << '\n';
  }
  os << '\n';
  for (const auto& s : summaries) {
    os << "## " << s.scenario << " (" << s.runs.size() << " runs)\n\n";
    for (const auto& r : s.runs) os << "- " << r << "/validation_matrix.csv\n";
    for (const auto& a : s.aggregate_csvs) os << "- aggregate: " << a << '\n';
    os << '\n';
  }
}

}  // namespace terraincl
