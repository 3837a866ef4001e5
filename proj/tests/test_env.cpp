#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "terraincl/env.hpp"

using namespace terraincl;

namespace {

using Patches = std::shared_ptr<const std::vector<TerrainPatch>>;

Patches make_patches(const EnvConfig& cfg, std::vector<TerrainKind> kinds, std::uint64_t seed = 1) {
  auto v = std::make_shared<std::vector<TerrainPatch>>();
  for (std::size_t i = 0; i < kinds.size(); ++i)
    v->push_back(make_patch(kinds[i], generate(kinds[i], TerrainParams{}, seed + i), cfg));
  return v;
}

std::vector<float> zeros(std::size_t n) { return std::vector<float>(n * kActDim, 0.0f); }

EnvConfig surrogate_cfg() {
  EnvConfig c;
  c.backend = Backend::Surrogate;
  return c;
}

}  // namespace

TEST(Env, ObservationLayoutSizes) {
  EXPECT_EQ(kObsDim, 235u);
  EXPECT_EQ(kObsDim - kProprioDim, 17u * 11u);
}

TEST(Env, ResetState) {
  EnvConfig cfg;
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::SlopeUp, false}}), 4, 3);
  env.reset_all(0);
  for (std::size_t i = 0; i < 4; ++i) {
    const AgentState& s = env.state(i);
    EXPECT_EQ(s.episode_time_s, 0.0);
    for (double a : s.prev_action) EXPECT_EQ(a, 0.0);
    EXPECT_EQ(s.joint_pos, cfg.default_joints);
    const double ground = height_at(env.patches()[0].field, s.base_pos.x, s.base_pos.y);
    EXPECT_DOUBLE_EQ(s.base_pos.z, ground + nominal_clearance(cfg));
  }
}

TEST(Env, ResetUnknownTerrainIsConfigError) {
  EnvConfig cfg;
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::Flat, false}}), 2, 3);
  EXPECT_THROW(env.reset_all(1), ConfigError);
}

TEST(Env, SameSeedSameCommands) {
  EnvConfig cfg;
  auto patches = make_patches(cfg, {{TerrainFamily::Flat, false}});
  VecEnv a(cfg, patches, 8, 21), b(cfg, patches, 8, 21);
  a.reset_all(0);
  b.reset_all(0);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(a.state(i).command.vx, b.state(i).command.vx);
    EXPECT_EQ(a.state(i).command.vy, b.state(i).command.vy);
    EXPECT_EQ(a.state(i).command.yaw_rate, b.state(i).command.yaw_rate);
  }
}

TEST(Env, CommandsWithinRanges) {
  CounterRng rng(5);
  CommandRanges r;
  for (int i = 0; i < 10000; ++i) {
    const Command c = sample_command(rng, r);
    EXPECT_GE(c.vx, r.vx_min);
    EXPECT_LE(c.vx, r.vx_max);
    EXPECT_GE(c.vy, r.vy_min);
    EXPECT_LE(c.vy, r.vy_max);
    EXPECT_GE(c.yaw_rate, r.yaw_rate_min);
    EXPECT_LE(c.yaw_rate, r.yaw_rate_max);
  }
  CommandRanges zero{0, 0, 0, 0, 0, 0};
  const Command c = sample_command(rng, zero);
  EXPECT_EQ(c.vx, 0.0);
  EXPECT_EQ(c.vy, 0.0);
  EXPECT_EQ(c.yaw_rate, 0.0);
}

TEST(Env, PerfectTrackingReward) {
  AgentState before, after;
  std::array<double, kActDim> action{};
  RewardWeights w;
  EXPECT_DOUBLE_EQ(compute_reward(before, after, action, false, w), w.w_lin + w.w_ang);
  EXPECT_DOUBLE_EQ(compute_reward(before, after, action, true, w), w.w_lin + w.w_ang - w.c_fall);
}

TEST(Env, RewardMatchesHandComputation) {
  AgentState before, after;
  after.command = {0.5, -0.2, 0.3};
  after.base_lin_vel = {0.3, 0.1, 0.0};
  after.base_yaw_rate = -0.1;
  before.prev_action[0] = 0.1;
  after.joint_vel[2] = 2.0;
  std::array<double, kActDim> action{};
  action[0] = 0.4;
  action[5] = -0.2;
  // Spelled out term by term: e_xy^2 = 0.04 + 0.09, e_w^2 = 0.16,
  // |a - a_prev|^2 = 0.09 + 0.04, |qdot|^2 = 4.
  const double expected = 1.0 * std::exp(-0.13 / 0.25) + 0.5 * std::exp(-0.16 / 0.25) - 0.01 * 0.13 - 0.0005 * 4.0;
  EXPECT_NEAR(compute_reward(before, after, action, false, RewardWeights{}), expected, 1e-12);
}

TEST(Env, WalkerZeroCommandHoldingDefaults) {
  EnvConfig cfg;
  cfg.commands = {0, 0, 0, 0, 0, 0};
  cfg.spawn_jitter_m = 0.0;
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::Flat, false}}), 3, 1);
  env.reset_all(0);
  for (int t = 0; t < 50; ++t) {
    const StepBatch& b = env.step(zeros(3));
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_DOUBLE_EQ(b.reward[i], cfg.reward.w_lin + cfg.reward.w_ang);
      EXPECT_FALSE(b.done(i));
    }
  }
}

TEST(Env, TimeoutExactlyOnStep1000) {
  EnvConfig cfg;
  cfg.commands = {0, 0, 0, 0, 0, 0};
  ASSERT_EQ(cfg.episode_steps(), 1000u);
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::Flat, false}}), 2, 1);
  env.reset_all(0);
  for (int t = 1; t <= 1000; ++t) {
    const StepBatch& b = env.step(zeros(2));
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_FALSE(b.terminated[i]);
      EXPECT_EQ(static_cast<bool>(b.timed_out[i]), t == 1000) << "step " << t;
    }
  }
  EXPECT_EQ(env.state(0).episode_steps, 0u);  // auto-reset
}

TEST(Env, RejectsNonIntegerEpisode) {
  EnvConfig cfg;
  cfg.dt_s = 0.03;
  EXPECT_THROW(cfg.validate(), ParamError);
}

TEST(Env, ForwardKinematicsOracle) {
  EnvConfig cfg;
  CounterRng rng(8);
  for (int k = 0; k < 200; ++k) {
    const double t1 = rng.uniform(-1, 3), t2 = rng.uniform(-2.6, -0.9);
    const Vec3 p = foot_position_body(0, 0.0, t1, t2, cfg);
    const double l1 = cfg.thigh_length_m, l2 = cfg.shank_length_m;
    EXPECT_NEAR(p.x - cfg.hip_offset_x_m, l1 * std::sin(t1) + l2 * std::sin(t1 + t2), 1e-12);
    EXPECT_NEAR(p.z, -(l1 * std::cos(t1) + l2 * std::cos(t1 + t2)), 1e-12);
    EXPECT_NEAR(p.y, cfg.hip_offset_y_m, 1e-12);
  }
  // Abduction rotates the leg plane about x: leg length in y-z is preserved.
  const Vec3 a = foot_position_body(1, 0.3, 0.8, -1.5, cfg);
  const Vec3 b = foot_position_body(1, 0.0, 0.8, -1.5, cfg);
  EXPECT_NEAR(std::hypot(a.y + cfg.hip_offset_y_m, a.z), std::abs(b.z), 1e-12);
}

TEST(Env, StandingStillDoesNotMove) {
  EnvConfig cfg;
  const HeightField f = generate({TerrainFamily::Flat, false}, TerrainParams{}, 0);
  AgentState s;
  s.base_pos = {8.0, 4.0, nominal_clearance(cfg)};
  s.joint_pos = cfg.default_joints;
  for (int t = 0; t < 10; ++t) {
    EXPECT_FALSE(walker_dynamics(s, cfg.default_joints, f, cfg));
    EXPECT_EQ(s.base_pos.x, 8.0);
    EXPECT_EQ(s.base_pos.y, 4.0);
  }
}

TEST(Env, TractionSign) {
  EnvConfig cfg;
  const HeightField f = generate({TerrainFamily::Flat, false}, TerrainParams{}, 0);
  AgentState s;
  s.base_pos = {8.0, 4.0, nominal_clearance(cfg)};
  s.joint_pos = cfg.default_joints;
  // Lower hip flexion on all legs sweeps the feet backwards relative to the base.
  JointVec target = cfg.default_joints;
  for (std::size_t leg = 0; leg < kNumLegs; ++leg) target[3 * leg + 1] -= 0.1;
  const Vec3 before = foot_position_body(0, 0.0, 0.8, -1.5, cfg);
  walker_dynamics(s, target, f, cfg);
  const Vec3 after = foot_position_body(0, 0.0, 0.7, -1.5, cfg);
  const double sweep = after.x - before.x;
  ASSERT_LT(sweep, 0.0);
  EXPECT_NEAR(s.base_pos.x - 8.0, -sweep, 1e-12);
  EXPECT_NEAR(s.base_pos.y, 4.0, 1e-12);
  EXPECT_GT(s.base_lin_vel.x, 0.0);
}

TEST(Env, LiftedBaseFallsAndTerminates) {
  EnvConfig cfg;
  const HeightField f = generate({TerrainFamily::Flat, false}, TerrainParams{}, 0);
  AgentState s;
  s.base_pos = {8.0, 4.0, 2.0};
  s.joint_pos = cfg.default_joints;
  bool fell = false;
  int steps = 0;
  while (!fell && steps < 100) {
    fell = walker_dynamics(s, cfg.default_joints, f, cfg);
    ++steps;
  }
  EXPECT_TRUE(fell);
  EXPECT_EQ(steps, 26);  // air time must exceed 0.5 s at dt = 0.02
}

TEST(Env, SurrogateRewards) {
  EnvConfig cfg = surrogate_cfg();
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::SlopeUp, false}}), 2, 1);
  env.reset_all(0);
  const auto& best = cfg.surrogate_targets[static_cast<std::size_t>(TerrainFamily::SlopeUp)];
  std::vector<float> a(2 * kActDim);
  for (std::size_t j = 0; j < kActDim; ++j) a[j] = a[kActDim + j] = static_cast<float>(best[j]);
  a[kActDim + 1] += 1.0f;  // hip flexion has room above the target
  const StepBatch& b = env.step(a);
  EXPECT_NEAR(b.reward[0], 0.0, 1e-12);
  EXPECT_NEAR(b.reward[1], -1.0, 1e-6);
}

TEST(Env, SurrogateObservation) {
  EnvConfig cfg = surrogate_cfg();
  auto patches = make_patches(cfg, {{TerrainFamily::StairsDown, false}});
  VecEnv env(cfg, patches, 3, 4);
  env.reset_all(0);
  env.step(zeros(3));
  for (std::size_t i = 0; i < 3; ++i) {
    const auto o = env.observation(i);
    ASSERT_EQ(o.size(), kObsDim);
    for (std::size_t k = 0; k < kProprioDim; ++k) EXPECT_EQ(o[k], 0.0f);
    for (std::size_t k = 0; k < kScanSize; ++k)
      EXPECT_NEAR(o[kProprioDim + k], (*patches)[0].signature[k], cfg.surrogate_noise + 1e-6);
  }
}

TEST(Env, SurrogateEpisodesAre24Steps) {
  EnvConfig cfg = surrogate_cfg();
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::Flat, false}}), 2, 1);
  env.reset_all(0);
  for (int t = 1; t <= 48; ++t) {
    const StepBatch& b = env.step(zeros(2));
    EXPECT_EQ(static_cast<bool>(b.timed_out[0]), t % 24 == 0);
    EXPECT_FALSE(b.terminated[0]);
  }
}

TEST(Env, NonFiniteActionFaults) {
  EnvConfig cfg;
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::Flat, false}}), 2, 1);
  env.reset_all(0);
  auto a = zeros(2);
  a[3] = std::numeric_limits<float>::quiet_NaN();
  const StepBatch& b = env.step(a);
  EXPECT_TRUE(b.faulted[0]);
  EXPECT_TRUE(b.terminated[0]);
  EXPECT_FALSE(b.timed_out[0]);
  EXPECT_EQ(b.reward[0], -cfg.reward.c_fall);
  EXPECT_FALSE(b.faulted[1]);
  for (float v : b.obs) EXPECT_TRUE(std::isfinite(v));
}

TEST(Env, ActionsClampedToJointLimits) {
  EnvConfig cfg;
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::Flat, false}}), 1, 1);
  env.reset_all(0);
  std::vector<float> a(kActDim, 50.0f);
  for (int t = 0; t < 3; ++t) {
    env.step(a);
    const AgentState& s = env.state(0);
    for (std::size_t j = 0; j < kActDim; ++j) {
      EXPECT_LE(s.joint_pos[j], cfg.joint_upper[j]);
      EXPECT_GE(s.joint_pos[j], cfg.joint_lower[j]);
      if (s.episode_steps > 0) {
        EXPECT_DOUBLE_EQ(s.prev_action[j], cfg.joint_upper[j] - cfg.default_joints[j]);
      }
    }
  }
}

TEST(Env, EpisodeTotalsEqualRewardSums) {
  EnvConfig cfg;
  cfg.episode_cap_s = 2.0;
  const std::size_t n = 16;
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::StairsUp, true}}), n, 9);
  env.reset_all(0);
  CounterRng rng(3);
  std::vector<double> sums(n, 0.0);
  std::size_t episodes = 0;
  for (int t = 0; t < 600; ++t) {
    std::vector<float> a(n * kActDim);
    for (float& v : a) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const StepBatch& b = env.step(a);
    for (std::size_t i = 0; i < n; ++i) {
      sums[i] += b.reward[i];
      EXPECT_FALSE(b.terminated[i] && b.timed_out[i]);
      EXPECT_EQ(b.total(i).has_value(), b.done(i));
      if (b.done(i)) {
        EXPECT_NEAR(*b.total(i), sums[i], 1e-6);
        sums[i] = 0.0;
        ++episodes;
      }
    }
  }
  EXPECT_GT(episodes, 0u);
}

TEST(Env, RandomActionFuzzStaysFinite) {
  EnvConfig cfg;
  const std::size_t n = 20;
  auto patches = make_patches(cfg, {{TerrainFamily::Tiles, true}, {TerrainFamily::SlopeDown, true}});
  VecEnv env(cfg, patches, n, 2);
  std::vector<std::size_t> ids(n), terrains(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = i;
    terrains[i] = i % 2;
  }
  env.reset(ids, terrains);
  CounterRng rng(17);
  for (int t = 0; t < 5000; ++t) {  // 10^5 agent steps
    std::vector<float> a(n * kActDim);
    for (float& v : a) v = static_cast<float>(rng.uniform(-3.0, 3.0));
    const StepBatch& b = env.step(a);
    for (float v : b.obs) ASSERT_TRUE(std::isfinite(v));
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_TRUE(std::isfinite(b.reward[i]));
      const AgentState& s = env.state(i);
      ASSERT_LE(s.episode_time_s, cfg.episode_cap_s + 1e-9);
      for (std::size_t j = 0; j < kActDim; ++j) {
        ASSERT_LE(s.joint_pos[j], cfg.joint_upper[j]);
        ASSERT_GE(s.joint_pos[j], cfg.joint_lower[j]);
      }
    }
  }
}

TEST(Env, FlatHoldingStillNeverTerminatesEarly) {
  EnvConfig cfg;
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::Flat, false}}), 8, 6);
  env.reset_all(0);
  for (int t = 1; t <= 1000; ++t) {
    const StepBatch& b = env.step(zeros(8));
    for (std::size_t i = 0; i < 8; ++i) ASSERT_FALSE(b.terminated[i]) << "step " << t;
  }
}

TEST(Env, ObservationBlocks) {
  EnvConfig cfg;
  VecEnv env(cfg, make_patches(cfg, {{TerrainFamily::Flat, false}}), 1, 6);
  env.reset_all(0);
  const AgentState& s = env.state(0);
  const auto o = env.observation(0);
  EXPECT_FLOAT_EQ(o[8], -1.0f);
  EXPECT_FLOAT_EQ(o[9], static_cast<float>(s.command.vx * cfg.lin_vel_scale));
  EXPECT_FLOAT_EQ(o[11], static_cast<float>(s.command.yaw_rate * cfg.ang_vel_scale));
  for (std::size_t k = 12; k < kProprioDim; ++k) EXPECT_EQ(o[k], 0.0f);
  for (std::size_t k = kProprioDim; k < kObsDim; ++k)
    EXPECT_NEAR(o[k], -nominal_clearance(cfg), 1e-6);
}

TEST(Env, ChunkingDoesNotChangeResults) {
  // 130 agents span three stepping chunks; agent 129 must match a lone run
  // only through its own stream, so compare two envs of different size.
  EnvConfig cfg;
  auto patches = make_patches(cfg, {{TerrainFamily::Tiles, false}});
  VecEnv big(cfg, patches, 130, 4), small(cfg, patches, 3, 4);
  big.reset_all(0);
  small.reset_all(0);
  for (int t = 0; t < 30; ++t) {
    std::vector<float> ab(130 * kActDim, 0.1f), as(3 * kActDim, 0.1f);
    big.step(ab);
    small.step(as);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < kObsDim; ++k) ASSERT_EQ(big.observation(i)[k], small.observation(i)[k]);
  }
}
