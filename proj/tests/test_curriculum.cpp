#include <gtest/gtest.h>

#include <memory>
#include <vector>

#include "terraincl/curriculum.hpp"

using namespace terraincl;

namespace {

using F = TerrainFamily;

}  // namespace

TEST(Curriculum, EasyToHardOrder) {
  const Scenario s = build_scenario("easy2hard");
  const std::vector<TerrainKind> want = {{F::Flat, false},  {F::SlopeDown, false}, {F::StairsDown, false},
                                         {F::Tiles, false}, {F::Flat, false},      {F::SlopeUp, true},
                                         {F::StairsUp, false}, {F::Tiles, false}};
  ASSERT_EQ(s.phases.size(), want.size());
  for (std::size_t p = 0; p < want.size(); ++p) {
    EXPECT_EQ(s.phases[p].kind, want[p]) << p;
    EXPECT_EQ(s.phases[p].length_iters, 500u);
  }
  EXPECT_EQ(s.total_iterations(), 4000u);
}

TEST(Curriculum, HardToEasyIsExactReverse) {
  const Scenario a = build_scenario("easy2hard");
  const Scenario b = build_scenario("hard2easy");
  EXPECT_EQ(b.name, "hard2easy");
  ASSERT_EQ(a.phases.size(), b.phases.size());
  for (std::size_t p = 0; p < a.phases.size(); ++p) EXPECT_EQ(b.phases[p], a.phases[a.phases.size() - 1 - p]);
  EXPECT_EQ(reversed(reversed(a)), a);
  EXPECT_EQ(reversed(a), b);
  const Scenario c = custom_scenario("mine", {{F::Flat, false}, {F::Tiles, false}}, 3);
  EXPECT_EQ(reversed(c).name, "mine_reversed");
  EXPECT_EQ(reversed(reversed(c)), c);
}

TEST(Curriculum, PhaseLookup) {
  const Scenario s = build_scenario("easy2hard");
  EXPECT_EQ(phase_at(s, 0).kind, (TerrainKind{F::Flat, false}));
  EXPECT_EQ(phase_at(s, 0).index, 0u);
  EXPECT_EQ(phase_at(s, 499).index, 0u);
  EXPECT_EQ(phase_at(s, 500).index, 1u);
  EXPECT_EQ(phase_at(s, 2000).kind, (TerrainKind{F::Flat, false}));
  EXPECT_EQ(phase_at(s, 2000).index, 4u);
  EXPECT_EQ(phase_at(s, 3999).kind, (TerrainKind{F::Tiles, false}));
  EXPECT_THROW(phase_at(s, 4000), Fault);
}

TEST(Curriculum, SevenChangePointsAtMultiplesOfPhaseLength) {
  const Scenario s = build_scenario("hard2easy");
  std::vector<std::size_t> changes;
  for (std::size_t t = 1; t < s.total_iterations(); ++t)
    if (phase_at(s, t).index != phase_at(s, t - 1).index) changes.push_back(t);
  ASSERT_EQ(changes.size(), 7u);
  for (std::size_t i = 0; i < changes.size(); ++i) EXPECT_EQ(changes[i], 500 * (i + 1));
  for (std::size_t p = 0; p < 8; ++p) EXPECT_EQ(s.phase_end(p), 500 * (p + 1) - 1);
}

TEST(Curriculum, ShortPhases) {
  const Scenario s = build_scenario("easy2hard", 7);
  EXPECT_EQ(s.total_iterations(), 56u);
  EXPECT_EQ(phase_at(s, 13).index, 1u);
  EXPECT_EQ(phase_at(s, 14).index, 2u);
}

TEST(Curriculum, BadInputs) {
  EXPECT_THROW(build_scenario("medium"), ConfigError);
  EXPECT_THROW(build_scenario("easy2hard", 0), ConfigError);
  EXPECT_THROW(custom_scenario("x", {}), ConfigError);
}

TEST(Curriculum, PhaseChangeRelocatesWithoutEpisodeTotals) {
  EnvConfig cfg;
  cfg.backend = Backend::Surrogate;
  auto patches = std::make_shared<std::vector<TerrainPatch>>();
  for (TerrainKind k : {TerrainKind{F::Flat, false}, TerrainKind{F::Tiles, false}})
    patches->push_back(make_patch(k, generate(k, TerrainParams{}, 5), cfg));
  VecEnv env(cfg, patches, 6, 9);
  env.reset_all(0);
  const std::vector<float> zero(6 * kActDim, 0.0f);
  for (int t = 0; t < 5; ++t) env.step(zero);
  for (std::size_t a = 0; a < 6; ++a) EXPECT_GT(env.state(a).episode_steps, 0u);

  on_phase_change(env, 1);
  for (std::size_t a = 0; a < 6; ++a) {
    EXPECT_EQ(env.state(a).terrain_id, 1u);
    EXPECT_EQ(env.state(a).episode_steps, 0u);
    EXPECT_EQ(env.state(a).cumulative_reward, 0.0);
  }
  // The dropped partial episodes never surface as totals: the first episode
  // to finish after the change spans the full episode length on the new patch.
  std::size_t steps = 0;
  bool any_done = false;
  while (!any_done) {
    const StepBatch& b = env.step(zero);
    ++steps;
    for (std::size_t a = 0; a < 6; ++a) any_done = any_done || b.done(a);
  }
  EXPECT_EQ(steps, env.episode_steps());
  EXPECT_THROW(on_phase_change(env, 2), ConfigError);
}
