#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "terraincl/env.hpp"
#include "terraincl/error.hpp"
#include "terraincl/terrain.hpp"

namespace terraincl {

inline constexpr std::size_t kDefaultPhaseLength = 500;

struct Phase {
  TerrainKind kind;
  std::size_t length_iters = kDefaultPhaseLength;

  friend bool operator==(const Phase&, const Phase&) = default;
};

struct Scenario {
  std::string name;
  std::vector<Phase> phases;

  std::size_t total_iterations() const {
    std::size_t n = 0;
    for (const auto& p : phases) n += p.length_iters;
    return n;
  }

  // Last iteration of phase p.
  std::size_t phase_end(std::size_t p) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i <= p; ++i) n += phases[i].length_iters;
    return n - 1;
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Easy-to-hard progression; hard-to-easy is its exact reverse.
inline std::vector<TerrainKind> easy_to_hard_kinds() {
  using F = TerrainFamily;
  return {{F::Flat, false},    {F::SlopeDown, false}, {F::StairsDown, false}, {F::Tiles, false},
          {F::Flat, false},    {F::SlopeUp, true},    {F::StairsUp, false},   {F::Tiles, false}};
}

inline Scenario custom_scenario(std::string name, const std::vector<TerrainKind>& kinds,
                                std::size_t phase_length = kDefaultPhaseLength) {
  if (phase_length == 0) throw ConfigError("curriculum: phase_length must be > 0");
  if (kinds.empty()) throw ConfigError("curriculum: scenario needs at least one phase");
  Scenario s{std::move(name), {}};
  for (const auto& k : kinds) s.phases.push_back({k, phase_length});
  return s;
}

inline std::string reversed_name(std::string_view name) {
  if (name == "easy2hard") return "hard2easy";
  if (name == "hard2easy") return "easy2hard";
  return std::string(name) + "_reversed";
}

inline Scenario reversed(const Scenario& s) {
  Scenario r{reversed_name(s.name), s.phases};
  std::reverse(r.phases.begin(), r.phases.end());
  if (s.name.size() > 9 && s.name.ends_with("_reversed")) r.name = s.name.substr(0, s.name.size() - 9);
  return r;
}

inline Scenario build_scenario(std::string_view name, std::size_t phase_length = kDefaultPhaseLength) {
  if (name == "easy2hard") return custom_scenario("easy2hard", easy_to_hard_kinds(), phase_length);
  if (name == "hard2easy") return reversed(custom_scenario("easy2hard", easy_to_hard_kinds(), phase_length));
  throw ConfigError("curriculum: unknown scenario '" + std::string(name) + "' (expected easy2hard|hard2easy)");
}

struct PhasePosition {
  std::size_t index = 0;
  TerrainKind kind;
};

inline PhasePosition phase_at(const Scenario& s, std::size_t iteration) {
  std::size_t start = 0;
  for (std::size_t p = 0; p < s.phases.size(); ++p) {
    if (iteration < start + s.phases[p].length_iters) return {p, s.phases[p].kind};
    start += s.phases[p].length_iters;
  }
  throw Fault("curriculum: iteration " + std::to_string(iteration) + " outside [0, " + std::to_string(start) + ")");
}

// Every training agent is force-reset onto the new terrain patch; in-progress
// episodes end without reporting a total.
inline void on_phase_change(VecEnv& env, std::size_t terrain_id) { env.relocate_all(terrain_id); }

}  // namespace terraincl
