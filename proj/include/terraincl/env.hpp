#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "terraincl/error.hpp"
#include "terraincl/parallel.hpp"
#include "terraincl/rng.hpp"
#include "terraincl/terrain.hpp"

namespace terraincl {

inline constexpr std::size_t kActDim = 12;
inline constexpr std::size_t kProprioDim = 48;
inline constexpr std::size_t kObsDim = kProprioDim + kScanSize;  // 235
inline constexpr std::size_t kNumLegs = 4;

using JointVec = std::array<double, kActDim>;

enum class Backend : std::uint8_t { Walker, Surrogate };

struct Command {
  double vx = 0.0;        // m/s, heading frame forward
  double vy = 0.0;        // m/s, heading frame left
  double yaw_rate = 0.0;  // rad/s
};

struct CommandRanges {
  double vx_min = -1.0, vx_max = 1.0;
  double vy_min = -0.5, vy_max = 0.5;
  double yaw_rate_min = -1.0, yaw_rate_max = 1.0;
};

struct RewardWeights {
  double w_lin = 1.0;
  double w_ang = 0.5;
  double sigma_lin = 0.25;
  double sigma_ang = 0.25;
  double c_action = 0.01;
  double c_jvel = 0.0005;
  double c_fall = 10.0;
};

// Per-family optimal action for the surrogate backend, indexed by TerrainFamily.
inline constexpr std::array<JointVec, kNumFamilies> kDefaultSurrogateTargets{{
    {0.40, -0.30, 0.35, -0.40, 0.30, -0.35, 0.40, -0.30, 0.35, -0.40, 0.30, -0.35},    // flat
    {0.30, 0.40, -0.30, -0.40, 0.35, 0.30, -0.35, -0.30, 0.40, 0.35, -0.40, -0.35},    // slope_up
    {-0.30, -0.40, 0.30, 0.40, -0.35, -0.30, 0.35, 0.30, -0.40, -0.35, 0.40, 0.35},    // slope_down
    {-0.45, 0.20, 0.30, 0.45, -0.20, -0.30, 0.25, -0.45, 0.20, -0.25, 0.45, -0.20},    // stairs_up
    {0.45, -0.20, -0.30, -0.45, 0.20, 0.30, -0.25, 0.45, -0.20, 0.25, -0.45, 0.20},    // stairs_down
    {-0.40, 0.30, -0.35, 0.40, -0.30, 0.35, -0.40, 0.30, -0.35, 0.40, -0.30, 0.35},    // tiles
}};

struct EnvConfig {
  Backend backend = Backend::Walker;
  double dt_s = 0.02;
  double episode_cap_s = 20.0;
  CommandRanges commands;
  RewardWeights reward;

  // Joint order per leg: abduction, hip flexion, knee. Legs FL, FR, RL, RR.
  JointVec default_joints{0.0, 0.8, -1.5, 0.0, 0.8, -1.5, 0.0, 0.8, -1.5, 0.0, 0.8, -1.5};
  JointVec joint_lower{-0.8, -1.0, -2.6, -0.8, -1.0, -2.6, -0.8, -1.0, -2.6, -0.8, -1.0, -2.6};
  JointVec joint_upper{0.8, 3.0, -0.9, 0.8, 3.0, -0.9, 0.8, 3.0, -0.9, 0.8, 3.0, -0.9};
  double joint_rate_max = 10.0;  // rad/s
  double thigh_length_m = 0.2;
  double shank_length_m = 0.2;
  double hip_offset_x_m = 0.183;
  double hip_offset_y_m = 0.13;
  double contact_tolerance_m = 0.02;
  double z_relax_rate = 10.0;  // 1/s
  double fall_rate = 1.0;      // m/s
  double max_air_time_s = 0.5;
  double min_base_clearance_m = 0.05;
  double spawn_jitter_m = 0.5;

  double lin_vel_scale = 0.5;
  double ang_vel_scale = 0.5;
  double joint_vel_scale = 0.05;
  double height_clip_m = 1.0;
  double scan_spacing_m = 0.1;

  std::size_t surrogate_episode_steps = 24;
  double surrogate_noise = 0.01;
  std::array<JointVec, kNumFamilies> surrogate_targets = kDefaultSurrogateTargets;

  std::size_t episode_steps() const {
    return static_cast<std::size_t>(std::llround(episode_cap_s / dt_s));
  }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ParamError(std::string("env: ") + what);
    };
    require(std::isfinite(dt_s) && dt_s > 0.0, "dt_s > 0");
    require(episode_cap_s > 0.0, "episode_cap_s > 0");
    const double n = episode_cap_s / dt_s;
    require(std::abs(n - std::round(n)) < 1e-9 * n, "episode_cap_s / dt_s is an integer");
    require(commands.vx_min <= commands.vx_max && commands.vy_min <= commands.vy_max &&
                commands.yaw_rate_min <= commands.yaw_rate_max,
            "command ranges ordered (min <= max)");
    for (std::size_t j = 0; j < kActDim; ++j) {
      require(joint_lower[j] <= default_joints[j] && default_joints[j] <= joint_upper[j],
              "default joints within joint limits");
    }
    require(joint_rate_max > 0.0, "joint_rate_max > 0");
    require(thigh_length_m > 0.0 && shank_length_m > 0.0, "leg segment lengths > 0");
    require(reward.sigma_lin > 0.0 && reward.sigma_ang > 0.0, "reward sigmas > 0");
    require(surrogate_episode_steps > 0, "surrogate_episode_steps > 0");
  }
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// Foot position in the base frame: abduction rotates the leg plane about the
// leg's x-axis, then a planar thigh/shank chain, offset by the hip mount.
inline Vec3 foot_position_body(std::size_t leg, double abduction, double hip, double knee,
                               const EnvConfig& cfg) {
  const double px = cfg.thigh_length_m * std::sin(hip) + cfg.shank_length_m * std::sin(hip + knee);
  const double pz = -(cfg.thigh_length_m * std::cos(hip) + cfg.shank_length_m * std::cos(hip + knee));
  const double sx = (leg < 2) ? 1.0 : -1.0;          // front legs forward
  const double sy = (leg % 2 == 0) ? 1.0 : -1.0;     // left legs +y
  return {sx * cfg.hip_offset_x_m + px, sy * cfg.hip_offset_y_m - std::sin(abduction) * pz,
          std::cos(abduction) * pz};
}

inline double nominal_clearance(const EnvConfig& cfg) {
  const auto& q = cfg.default_joints;
  double sum = 0.0;
  for (std::size_t leg = 0; leg < kNumLegs; ++leg) {
    sum += -foot_position_body(leg, q[3 * leg], q[3 * leg + 1], q[3 * leg + 2], cfg).z;
  }
  return sum / static_cast<double>(kNumLegs);
}

struct AgentState {
  Vec3 base_pos;
  double base_yaw = 0.0;
  Vec3 base_lin_vel;  // heading frame
  double base_yaw_rate = 0.0;
  JointVec joint_pos{};
  JointVec joint_vel{};
  JointVec prev_action{};  // offsets from default joints, after clamping
  Command command;
  double episode_time_s = 0.0;
  std::size_t episode_steps = 0;
  double air_time_s = 0.0;
  double cumulative_reward = 0.0;
  std::size_t terrain_id = 0;
};

struct TerrainPatch {
  TerrainKind kind;
  HeightField field;
  HeightScan signature{};  // scan at the patch center, nominal height, yaw 0
};

inline TerrainPatch make_patch(TerrainKind kind, HeightField field, const EnvConfig& cfg) {
  TerrainPatch p{kind, std::move(field), {}};
  const double cx = p.field.center_x(), cy = p.field.center_y();
  const BasePose pose{cx, cy, height_at(p.field, cx, cy) + nominal_clearance(cfg), 0.0};
  p.signature = sample_height_grid(p.field, pose, cfg.scan_spacing_m, cfg.height_clip_m);
  return p;
}

inline Command sample_command(CounterRng& rng, const CommandRanges& r) {
  Command c;
  c.vx = rng.uniform(r.vx_min, r.vx_max);
  c.vy = rng.uniform(r.vy_min, r.vy_max);
  c.yaw_rate = rng.uniform(r.yaw_rate_min, r.yaw_rate_max);
  return c;
}

// Per-step reward: velocity tracking exponentials minus smoothness and fall
// penalties. Velocities are heading-frame.
inline double compute_reward(const AgentState& before, const AgentState& after,
                             std::span<const double> action, bool fell, const RewardWeights& w) {
  const double ex = after.command.vx - after.base_lin_vel.x;
  const double ey = after.command.vy - after.base_lin_vel.y;
  const double ew = after.command.yaw_rate - after.base_yaw_rate;
  double r = w.w_lin * std::exp(-(ex * ex + ey * ey) / w.sigma_lin) +
             w.w_ang * std::exp(-(ew * ew) / w.sigma_ang);
  double da = 0.0, jv = 0.0;
  for (std::size_t j = 0; j < kActDim; ++j) {
    const double d = action[j] - before.prev_action[j];
    da += d * d;
    jv += after.joint_vel[j] * after.joint_vel[j];
  }
  r -= w.c_action * da + w.c_jvel * jv;
  if (fell) r -= w.c_fall;
  return r;
}

inline double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

// Kinematic walker: rate-limited joints, stance from foot/terrain contact,
// traction from stance-foot sweep, first-order base height relaxation.
// Returns true when the agent fell this step.
inline bool walker_dynamics(AgentState& s, const JointVec& target, const HeightField& field,
                            const EnvConfig& cfg) {
  const double dt = cfg.dt_s;
  const double cyaw = std::cos(s.base_yaw), syaw = std::sin(s.base_yaw);
  auto to_world_xy = [&](const Vec3& p) {
    return std::array<double, 2>{cyaw * p.x - syaw * p.y, syaw * p.x + cyaw * p.y};
  };

  std::array<Vec3, kNumLegs> before{}, after{};
  for (std::size_t leg = 0; leg < kNumLegs; ++leg) {
    before[leg] = foot_position_body(leg, s.joint_pos[3 * leg], s.joint_pos[3 * leg + 1],
                                     s.joint_pos[3 * leg + 2], cfg);
  }
  const double max_step = cfg.joint_rate_max * dt;
  for (std::size_t j = 0; j < kActDim; ++j) {
    const double dq = std::clamp(target[j] - s.joint_pos[j], -max_step, max_step);
    const double q = std::clamp(s.joint_pos[j] + dq, cfg.joint_lower[j], cfg.joint_upper[j]);
    s.joint_vel[j] = (q - s.joint_pos[j]) / dt;
    s.joint_pos[j] = q;
  }
  for (std::size_t leg = 0; leg < kNumLegs; ++leg) {
    after[leg] = foot_position_body(leg, s.joint_pos[3 * leg], s.joint_pos[3 * leg + 1],
                                    s.joint_pos[3 * leg + 2], cfg);
  }

  std::size_t stance = 0;
  double dx = 0.0, dy = 0.0, dyaw = 0.0, ground = 0.0;
  for (std::size_t leg = 0; leg < kNumLegs; ++leg) {
    const auto rel = to_world_xy(after[leg]);
    const double fx = s.base_pos.x + rel[0], fy = s.base_pos.y + rel[1];
    const double terrain = height_at(field, fx, fy);
    if (s.base_pos.z + after[leg].z > terrain + cfg.contact_tolerance_m) continue;
    const auto prev = to_world_xy(before[leg]);
    const double mx = rel[0] - prev[0], my = rel[1] - prev[1];
    ++stance;
    dx += mx;
    dy += my;
    const double r2 = rel[0] * rel[0] + rel[1] * rel[1];
    if (r2 > 1e-12) dyaw += (rel[0] * my - rel[1] * mx) / r2;
    ground += terrain;
  }

  const Vec3 old_pos = s.base_pos;
  double yaw_step = 0.0;
  if (stance >= 2) {
    const double n = static_cast<double>(stance);
    s.base_pos.x -= dx / n;
    s.base_pos.y -= dy / n;
    yaw_step = -dyaw / n;
    const double target_z = ground / n + nominal_clearance(cfg);
    s.base_pos.z += std::min(1.0, cfg.z_relax_rate * dt) * (target_z - s.base_pos.z);
    s.air_time_s = 0.0;
  } else {
    s.base_pos.z -= cfg.fall_rate * dt;
    s.air_time_s += dt;
  }
  s.base_yaw = wrap_angle(s.base_yaw + yaw_step);

  const double wvx = (s.base_pos.x - old_pos.x) / dt;
  const double wvy = (s.base_pos.y - old_pos.y) / dt;
  s.base_lin_vel = {cyaw * wvx + syaw * wvy, -syaw * wvx + cyaw * wvy, (s.base_pos.z - old_pos.z) / dt};
  s.base_yaw_rate = yaw_step / dt;

  const double under = height_at(field, s.base_pos.x, s.base_pos.y);
  // Air time is a sum of dt steps; the slack absorbs its rounding.
  return s.air_time_s > cfg.max_air_time_s + 1e-9 || s.base_pos.z < under + cfg.min_base_clearance_m;
}

// Results of one vectorized step. Agents that finished were auto-reset:
// `obs` holds their fresh observation and `terminal_obs` the final one.
struct StepBatch {
  std::size_t num_agents = 0;
  std::vector<float> obs;
  std::vector<float> terminal_obs;
  std::vector<double> reward;
  std::vector<std::uint8_t> terminated;
  std::vector<std::uint8_t> timed_out;
  std::vector<std::uint8_t> faulted;
  std::vector<double> episode_total;

  void resize(std::size_t n) {
    num_agents = n;
    obs.assign(n * kObsDim, 0.0f);
    terminal_obs.assign(n * kObsDim, 0.0f);
    reward.assign(n, 0.0);
    terminated.assign(n, 0);
    timed_out.assign(n, 0);
    faulted.assign(n, 0);
    episode_total.assign(n, 0.0);
  }
  bool done(std::size_t i) const { return terminated[i] || timed_out[i]; }
  std::optional<double> total(std::size_t i) const {
    return done(i) ? std::optional<double>(episode_total[i]) : std::nullopt;
  }
};

// N agents spread over read-only terrain patches. Each agent owns a labeled
// random stream, so results do not depend on how agents are chunked.
class VecEnv {
 public:
  static constexpr std::size_t kChunk = 64;

  VecEnv(EnvConfig cfg, std::shared_ptr<const std::vector<TerrainPatch>> patches,
         std::size_t num_agents, std::uint64_t seed)
      : cfg_(std::move(cfg)), patches_(std::move(patches)), states_(num_agents), rngs_(num_agents) {
    cfg_.validate();
    if (!patches_ || patches_->empty()) throw ConfigError("env: no terrain patches");
    episode_steps_ = cfg_.backend == Backend::Walker ? cfg_.episode_steps() : cfg_.surrogate_episode_steps;
    clearance_ = nominal_clearance(cfg_);
    for (std::size_t i = 0; i < num_agents; ++i) rngs_[i] = CounterRng(derive_seed(seed, "agent", i));
    obs_.assign(num_agents * kObsDim, 0.0f);
    batch_.resize(num_agents);
  }

  std::size_t num_agents() const { return states_.size(); }
  std::size_t episode_steps() const { return episode_steps_; }
  const EnvConfig& config() const { return cfg_; }
  const std::vector<TerrainPatch>& patches() const { return *patches_; }
  const AgentState& state(std::size_t i) const { return states_[i]; }
  AgentState& mutable_state(std::size_t i) { return states_[i]; }
  std::span<const float> observations() const { return obs_; }
  std::span<const float> observation(std::size_t i) const {
    return std::span<const float>(obs_).subspan(i * kObsDim, kObsDim);
  }

  void reset(std::span<const std::size_t> agents, std::span<const std::size_t> terrain_ids) {
    if (agents.size() != terrain_ids.size()) throw Fault("env: reset agent/terrain count mismatch");
    for (std::size_t k = 0; k < agents.size(); ++k) {
      if (agents[k] >= states_.size()) throw ConfigError("env: unknown agent id");
      if (terrain_ids[k] >= patches_->size()) {
        throw ConfigError("env: unknown terrain id " + std::to_string(terrain_ids[k]));
      }
    }
    for (std::size_t k = 0; k < agents.size(); ++k) reset_agent(agents[k], terrain_ids[k]);
  }

  void reset_all(std::size_t terrain_id) {
    std::vector<std::size_t> ids(states_.size()), terrains(states_.size(), terrain_id);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    reset(ids, terrains);
  }

  // Administrative relocation: in-progress episodes are dropped without a total.
  void relocate_all(std::size_t terrain_id) { reset_all(terrain_id); }

  const StepBatch& step(std::span<const float> actions) {
    const std::size_t n = states_.size();
    if (actions.size() != n * kActDim) throw Fault("env: action batch has wrong size");
    std::fill(batch_.terminated.begin(), batch_.terminated.end(), 0);
    std::fill(batch_.timed_out.begin(), batch_.timed_out.end(), 0);
    std::fill(batch_.faulted.begin(), batch_.faulted.end(), 0);
    parallel_chunks(chunk_count(n, kChunk), [&](std::size_t c) {
      const auto range = chunk_range(n, kChunk, c);
      for (std::size_t i = range.begin; i < range.end; ++i) step_agent(i, actions.subspan(i * kActDim, kActDim));
    });
    batch_.obs = obs_;
    return batch_;
  }

  const StepBatch& last_batch() const { return batch_; }

 private:
  void reset_agent(std::size_t i, std::size_t terrain_id) {
    AgentState& s = states_[i];
    CounterRng& rng = rngs_[i];
    const TerrainPatch& patch = (*patches_)[terrain_id];
    s = AgentState{};
    s.terrain_id = terrain_id;
    s.command = sample_command(rng, cfg_.commands);
    const double jx = rng.uniform(-cfg_.spawn_jitter_m, cfg_.spawn_jitter_m);
    const double jy = rng.uniform(-cfg_.spawn_jitter_m, cfg_.spawn_jitter_m);
    s.base_yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    s.base_pos.x = patch.field.center_x() + jx;
    s.base_pos.y = patch.field.center_y() + jy;
    s.base_pos.z = height_at(patch.field, s.base_pos.x, s.base_pos.y) + clearance_;
    s.joint_pos = cfg_.default_joints;
    write_observation(i);
  }

  void step_agent(std::size_t i, std::span<const float> raw) {
    AgentState& s = states_[i];
    const TerrainPatch& patch = (*patches_)[s.terrain_id];
    const AgentState before = s;

    bool finite = true;
    JointVec action{}, target{};
    for (std::size_t j = 0; j < kActDim; ++j) {
      if (!std::isfinite(raw[j])) finite = false;
      target[j] = std::clamp(cfg_.default_joints[j] + static_cast<double>(raw[j]), cfg_.joint_lower[j],
                             cfg_.joint_upper[j]);
      action[j] = target[j] - cfg_.default_joints[j];
    }

    double reward = 0.0;
    bool fell = false;
    if (!finite) {
      reward = -cfg_.reward.c_fall;
      fell = true;
      batch_.faulted[i] = 1;
    } else if (cfg_.backend == Backend::Walker) {
      fell = walker_dynamics(s, target, patch.field, cfg_);
      reward = compute_reward(before, s, action, fell, cfg_.reward);
    } else {
      const JointVec& best = cfg_.surrogate_targets[static_cast<std::size_t>(patch.kind.family)];
      for (std::size_t j = 0; j < kActDim; ++j) {
        const double d = action[j] - best[j];
        reward -= d * d;
      }
    }
    if (finite) s.prev_action = action;
    s.episode_time_s += cfg_.dt_s;
    ++s.episode_steps;
    s.cumulative_reward += reward;
    batch_.reward[i] = static_cast<double>(reward);

    const bool timeout = !fell && s.episode_steps >= episode_steps_;
    if (fell || timeout) {
      write_observation(i);
      std::copy_n(obs_.begin() + static_cast<std::ptrdiff_t>(i * kObsDim), kObsDim,
                  batch_.terminal_obs.begin() + static_cast<std::ptrdiff_t>(i * kObsDim));
      batch_.terminated[i] = fell ? 1 : 0;
      batch_.timed_out[i] = timeout ? 1 : 0;
      batch_.episode_total[i] = s.cumulative_reward;
      reset_agent(i, s.terrain_id);
    } else {
      write_observation(i);
    }
  }

  void write_observation(std::size_t i) {
    const AgentState& s = states_[i];
    float* o = obs_.data() + i * kObsDim;
    const TerrainPatch& patch = (*patches_)[s.terrain_id];
    if (cfg_.backend == Backend::Surrogate) {
      std::fill(o, o + kProprioDim, 0.0f);
      CounterRng& rng = rngs_[i];
      for (std::size_t k = 0; k < kScanSize; ++k) {
        o[kProprioDim + k] =
            static_cast<float>(patch.signature[k] + rng.uniform(-cfg_.surrogate_noise, cfg_.surrogate_noise));
      }
      return;
    }
    const double lv = cfg_.lin_vel_scale, av = cfg_.ang_vel_scale;
    o[0] = static_cast<float>(s.base_lin_vel.x * lv);
    o[1] = static_cast<float>(s.base_lin_vel.y * lv);
    o[2] = static_cast<float>(s.base_lin_vel.z * lv);
    o[3] = 0.0f;
    o[4] = 0.0f;
    o[5] = static_cast<float>(s.base_yaw_rate * av);
    o[6] = 0.0f;  // projected gravity of a level base
    o[7] = 0.0f;
    o[8] = -1.0f;
    o[9] = static_cast<float>(s.command.vx * lv);
    o[10] = static_cast<float>(s.command.vy * lv);
    o[11] = static_cast<float>(s.command.yaw_rate * av);
    for (std::size_t j = 0; j < kActDim; ++j) {
      o[12 + j] = static_cast<float>(s.joint_pos[j] - cfg_.default_joints[j]);
      o[24 + j] = static_cast<float>(s.joint_vel[j] * cfg_.joint_vel_scale);
      o[36 + j] = static_cast<float>(s.prev_action[j]);
    }
    const auto scan = sample_height_grid(patch.field, {s.base_pos.x, s.base_pos.y, s.base_pos.z, s.base_yaw},
                                         cfg_.scan_spacing_m, cfg_.height_clip_m);
    for (std::size_t k = 0; k < kScanSize; ++k) o[kProprioDim + k] = static_cast<float>(scan[k]);
  }

  EnvConfig cfg_;
  std::shared_ptr<const std::vector<TerrainPatch>> patches_;
  std::vector<AgentState> states_;
  std::vector<CounterRng> rngs_;
  std::vector<float> obs_;
  StepBatch batch_;
  std::size_t episode_steps_ = 0;
  double clearance_ = 0.0;
};

}  // namespace terraincl
