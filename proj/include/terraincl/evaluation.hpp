#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "terraincl/curriculum.hpp"
#include "terraincl/env.hpp"
#include "terraincl/error.hpp"
#include "terraincl/policy.hpp"
#include "terraincl/ppo.hpp"

namespace terraincl {

// The last `kCapacity` episode totals, oldest evicted first.
class EpisodeWindow {
 public:
  static constexpr std::size_t kCapacity = 100;

  void push(double total) {
    values_[head_] = total;
    head_ = (head_ + 1) % kCapacity;
    if (count_ < kCapacity) ++count_;
  }

  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  // Chronological (oldest first) i-th entry.
  double at(std::size_t i) const { return values_[(head_ + kCapacity - count_ + i) % kCapacity]; }

  // Mean of what is there (up to 100), summed oldest to newest; absent when empty.
  std::optional<double> moving_average() const {
    if (count_ == 0) return std::nullopt;
    double sum = 0.0;
    for (std::size_t i = 0; i < count_; ++i) sum += at(i);
    return sum / static_cast<double>(count_);
  }

 private:
  std::array<double, kCapacity> values_{};
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

inline std::string terrain_label(std::size_t index, TerrainKind kind) {
  return std::to_string(index) + "_" + kind_name(kind);
}

// V[t][k]: moving-average validation reward on terrain column k at iteration t.
struct ValidationMatrix {
  std::vector<TerrainKind> kinds;
  std::vector<std::vector<std::optional<double>>> rows;
  std::vector<std::vector<std::size_t>> episodes_in_window;
  std::vector<std::size_t> phase_ends;

  std::size_t num_terrains() const { return kinds.size(); }
  std::size_t num_iterations() const { return rows.size(); }
  std::optional<double> at(std::size_t t, std::size_t k) const {
    return t < rows.size() ? rows[t][k] : std::nullopt;
  }
};

// Round-trips exactly, so metrics recomputed from a CSV match the run's own.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

inline void write_validation_csv(std::ostream& os, const ValidationMatrix& m) {
  os << "iteration,terrain,reward_ma,episodes_in_window\n";
  for (std::size_t t = 0; t < m.rows.size(); ++t) {
    for (std::size_t k = 0; k < m.num_terrains(); ++k) {
      os << t << ',' << terrain_label(k, m.kinds[k]) << ',' << format_optional(m.rows[t][k]) << ','
         << m.episodes_in_window[t][k] << '\n';
    }
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(line);
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline ValidationMatrix read_validation_csv(std::istream& is) {
  ValidationMatrix m;
  std::string line;
  if (!std::getline(is, line) || line != "iteration,terrain,reward_ma,episodes_in_window")
    throw ConfigError("validation csv: unexpected header");
  std::vector<std::string> labels;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw ConfigError("validation csv: malformed line '" + line + "'");
    const std::size_t t = std::stoull(f[0]);
    const auto us = f[1].find('_');
    if (us == std::string::npos) throw ConfigError("validation csv: bad terrain label '" + f[1] + "'");
    const std::size_t k = std::stoull(f[1].substr(0, us));
    if (t == 0) {
      if (k != labels.size()) throw ConfigError("validation csv: terrain columns out of order");
      labels.push_back(f[1]);
      m.kinds.push_back(parse_kind(f[1].substr(us + 1)));
      if (!m.rows.empty()) {
        m.rows[0].resize(labels.size());
        m.episodes_in_window[0].resize(labels.size(), 0);
      }
    } else if (k >= labels.size() || labels[k] != f[1]) {
      throw ConfigError("validation csv: inconsistent terrain label '" + f[1] + "'");
    }
    if (t == m.rows.size()) {
      m.rows.emplace_back(labels.size());
      m.episodes_in_window.emplace_back(labels.size(), 0);
    }
    if (t + 1 != m.rows.size()) throw ConfigError("validation csv: iterations out of order");
    m.rows[t][k] = f[2].empty() ? std::nullopt : std::optional<double>(std::stod(f[2]));
    m.episodes_in_window[t][k] = std::stoull(f[3]);
  }
  return m;
}

// Validation agents spread evenly over every terrain patch, acting with the
// mean action of a frozen snapshot. They own their random streams and never
// produce gradients.
class ValidationPool {
 public:
  ValidationPool(EnvConfig cfg, std::shared_ptr<const std::vector<TerrainPatch>> patches,
                 std::size_t agents_per_terrain, std::uint64_t seed)
      : env_(std::move(cfg), patches, agents_per_terrain * patches->size(), seed),
        per_terrain_(agents_per_terrain),
        windows_(patches->size()),
        last_counts_(patches->size(), 0) {
    if (agents_per_terrain == 0) throw ConfigError("validation: agents_per_terrain must be > 0");
    std::vector<std::size_t> ids(env_.num_agents()), terrains(env_.num_agents());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ids[i] = i;
      terrains[i] = i / per_terrain_;
    }
    env_.reset(ids, terrains);
  }

  std::size_t num_terrains() const { return windows_.size(); }
  std::size_t agents_per_terrain() const { return per_terrain_; }
  const EpisodeWindow& window(std::size_t k) const { return windows_[k]; }
  // Episodes that ended on terrain k during the most recent run().
  std::size_t last_episode_count(std::size_t k) const { return last_counts_[k]; }
  const VecEnv& env() const { return env_; }

  // Steps every validation agent `steps` times with the snapshot's mean action
  // and appends one row to the matrix.
  void run(const Policy* snapshot, std::size_t steps, ValidationMatrix& matrix) {
    if (!snapshot) throw Fault("validation: no policy snapshot available");
    const std::size_t n = env_.num_agents();
    std::vector<float> mean, unused;
    std::fill(last_counts_.begin(), last_counts_.end(), 0);
    for (std::size_t t = 0; t < steps; ++t) {
      evaluate_policy(*snapshot, env_.observations(), n, false, mean, unused);
      const StepBatch& res = env_.step(mean);
      for (std::size_t a = 0; a < n; ++a)
        if (res.done(a)) {
          windows_[a / per_terrain_].push(res.episode_total[a]);
          ++last_counts_[a / per_terrain_];
        }
    }
    std::vector<std::optional<double>> row(windows_.size());
    std::vector<std::size_t> counts(windows_.size());
    for (std::size_t k = 0; k < windows_.size(); ++k) {
      row[k] = windows_[k].moving_average();
      counts[k] = windows_[k].size();
    }
    matrix.rows.push_back(std::move(row));
    matrix.episodes_in_window.push_back(std::move(counts));
  }

 private:
  VecEnv env_;
  std::size_t per_terrain_;
  std::vector<EpisodeWindow> windows_;
  std::vector<std::size_t> last_counts_;
};

struct TerrainTransfer {
  std::string label;
  std::optional<double> forgetting;
  std::optional<double> backward_transfer;
  std::optional<double> forward_transfer;
};

struct TransferReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<TerrainTransfer> terrains;
};

inline constexpr const char* kForgettingFormula = "F(k) = max_{t<=T} V[t][k] - V[T][k]";
inline constexpr const char* kBwtFormula = "BWT(k) = V[T][k] - V[e(p_last(k))][k]";
inline constexpr const char* kFwtFormula =
    "FWT(k) = V[e(p_first(k)-1)][k] - V[0][k]  (0 when k is trained in the first phase)";

// Column k is "trained" in every phase whose terrain kind equals the kind of
// column k. e(p) is the last iteration of phase p and T the final iteration of
// the scenario; rows beyond T are ignored.
inline TransferReport transfer_metrics(const ValidationMatrix& m, const Scenario& s) {
  const std::size_t total = s.total_iterations();
  if (m.rows.size() < total) throw Fault("transfer: validation matrix shorter than the scenario");
  const std::size_t last = total - 1;
  TransferReport report;
  report.scenario = s.name;
  for (std::size_t k = 0; k < m.num_terrains(); ++k) {
    TerrainTransfer tt;
    tt.label = terrain_label(k, m.kinds[k]);
    const auto v_final = m.at(last, k);
    std::optional<double> peak;
    for (std::size_t t = 0; t <= last; ++t)
      if (const auto v = m.at(t, k)) peak = peak ? std::max(*peak, *v) : *v;
    if (peak && v_final) tt.forgetting = *peak - *v_final;

    std::optional<std::size_t> first, latest;
    for (std::size_t p = 0; p < s.phases.size(); ++p) {
      if (s.phases[p].kind == m.kinds[k]) {
        if (!first) first = p;
        latest = p;
      }
    }
    if (latest && v_final) {
      if (const auto v_end = m.at(s.phase_end(*latest), k)) tt.backward_transfer = *v_final - *v_end;
    }
    if (first) {
      const auto v0 = m.at(0, k);
      if (*first == 0) {
        if (v0) tt.forward_transfer = 0.0;
      } else if (const auto v_before = m.at(s.phase_end(*first - 1), k); v_before && v0) {
        tt.forward_transfer = *v_before - *v0;
      }
    }
    report.terrains.push_back(std::move(tt));
  }
  return report;
}

inline void write_transfer_text(std::ostream& os, const TransferReport& r) {
  os << "scenario = " << r.scenario << '\n'
     << "seed = " << r.seed << '\n'
     << "forgetting_formula = " << kForgettingFormula << '\n'
     << "bwt_formula = " << kBwtFormula << '\n'
     << "fwt_formula = " << kFwtFormula << '\n';
  for (const auto& t : r.terrains) {
    os << t.label << ".forgetting = " << (t.forgetting ? format_double(*t.forgetting) : "unavailable") << '\n'
       << t.label << ".backward_transfer = "
       << (t.backward_transfer ? format_double(*t.backward_transfer) : "unavailable") << '\n'
       << t.label << ".forward_transfer = "
       << (t.forward_transfer ? format_double(*t.forward_transfer) : "unavailable") << '\n';
  }
}

inline void write_transfer_csv(std::ostream& os, const TransferReport& r) {
  os << "terrain,forgetting,backward_transfer,forward_transfer\n";
  for (const auto& t : r.terrains) {
    os << t.label << ',' << format_optional(t.forgetting) << ',' << format_optional(t.backward_transfer) << ','
       << format_optional(t.forward_transfer) << '\n';
  }
}

}  // namespace terraincl
