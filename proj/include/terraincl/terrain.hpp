#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "terraincl/error.hpp"
#include "terraincl/rng.hpp"

namespace terraincl {

enum class TerrainFamily : std::uint8_t { Flat, SlopeUp, SlopeDown, StairsUp, StairsDown, Tiles };

inline constexpr std::size_t kNumFamilies = 6;

struct TerrainKind {
  TerrainFamily family = TerrainFamily::Flat;
  bool rough = false;

  friend bool operator==(const TerrainKind&, const TerrainKind&) = default;
};

inline constexpr std::string_view family_name(TerrainFamily f) {
  switch (f) {
    case TerrainFamily::Flat: return "flat";
    case TerrainFamily::SlopeUp: return "slope_up";
    case TerrainFamily::SlopeDown: return "slope_down";
    case TerrainFamily::StairsUp: return "stairs_up";
    case TerrainFamily::StairsDown: return "stairs_down";
    case TerrainFamily::Tiles: return "tiles";
  }
  return "?";
}

inline std::string kind_name(TerrainKind k) {
  std::string s(family_name(k.family));
  if (k.rough) s += "+rough";
  return s;
}

// Accepts "flat", "slope_up", ..., optionally suffixed with "+rough".
inline TerrainKind parse_kind(std::string_view text) {
  TerrainKind kind;
  constexpr std::string_view suffix = "+rough";
  if (text.size() > suffix.size() && text.substr(text.size() - suffix.size()) == suffix) {
    kind.rough = true;
    text.remove_suffix(suffix.size());
  }
  for (std::size_t f = 0; f < kNumFamilies; ++f) {
    if (family_name(static_cast<TerrainFamily>(f)) == text) {
      kind.family = static_cast<TerrainFamily>(f);
      return kind;
    }
  }
  throw ConfigError("unknown terrain kind '" + std::string(text) + "'");
}

struct TerrainParams {
  double patch_length_m = 16.0;  // along x
  double patch_width_m = 8.0;    // along y
  double cell_size_m = 0.05;
  double slope_grade = 0.25;
  double step_run_m = 0.30;
  double step_height_m = 0.10;
  double tile_cell_m = 0.25;
  double tile_height_max_m = 0.08;
  double rough_amplitude_m = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ParamError(std::string("terrain: ") + what);
    };
    require(std::isfinite(cell_size_m) && cell_size_m > 0.0, "cell_size_m > 0");
    auto multiple = [&](double len) {
      const double n = len / cell_size_m;
      return std::isfinite(n) && n >= 1.0 && std::abs(n - std::round(n)) < 1e-9 * std::max(1.0, n);
    };
    require(multiple(patch_length_m), "patch_length_m is a positive integer multiple of cell_size_m");
    require(multiple(patch_width_m), "patch_width_m is a positive integer multiple of cell_size_m");
    require(step_run_m >= 2.0 * cell_size_m, "step_run_m >= 2 * cell_size_m");
    require(tile_cell_m > 0.0, "tile_cell_m > 0");
    require(slope_grade >= 0.0 && step_height_m >= 0.0 && tile_height_max_m >= 0.0 &&
                rough_amplitude_m >= 0.0,
            "amplitude and height parameters >= 0");
  }

  std::size_t cols() const { return static_cast<std::size_t>(std::llround(patch_length_m / cell_size_m)) + 1; }
  std::size_t rows() const { return static_cast<std::size_t>(std::llround(patch_width_m / cell_size_m)) + 1; }
};

// Upper bound on |height| for a generated patch.
inline double max_amplitude(TerrainKind kind, const TerrainParams& p) {
  double a = 0.0;
  switch (kind.family) {
    case TerrainFamily::Flat: break;
    case TerrainFamily::SlopeUp:
    case TerrainFamily::SlopeDown: a = p.slope_grade * p.patch_length_m; break;
    case TerrainFamily::StairsUp:
    case TerrainFamily::StairsDown: a = p.step_height_m * std::floor(p.patch_length_m / p.step_run_m); break;
    case TerrainFamily::Tiles: a = p.tile_height_max_m; break;
  }
  if (kind.rough) a += p.rough_amplitude_m;
  return a;
}

// Row-major grid (rows along y, cols along x). Node (r, c) sits at
// (origin_x + c * cell, origin_y + r * cell). Immutable after generation.
struct HeightField {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double cell_size_m = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::vector<double> heights;

  double node(std::size_t r, std::size_t c) const { return heights[r * cols + c]; }
  double node_x(std::size_t c) const { return origin_x + static_cast<double>(c) * cell_size_m; }
  double node_y(std::size_t r) const { return origin_y + static_cast<double>(r) * cell_size_m; }
  double length_m() const { return static_cast<double>(cols - 1) * cell_size_m; }
  double width_m() const { return static_cast<double>(rows - 1) * cell_size_m; }
  double center_x() const { return origin_x + 0.5 * length_m(); }
  double center_y() const { return origin_y + 0.5 * width_m(); }
};

// Analytic (noise-free) height of the deterministic families at local x.
inline double analytic_height(TerrainFamily family, const TerrainParams& p, double x) {
  switch (family) {
    case TerrainFamily::SlopeUp: return p.slope_grade * x;
    case TerrainFamily::SlopeDown: return -p.slope_grade * x;
    case TerrainFamily::StairsUp: return p.step_height_m * std::floor(x / p.step_run_m);
    case TerrainFamily::StairsDown: return -p.step_height_m * std::floor(x / p.step_run_m);
    default: return 0.0;
  }
}

inline HeightField generate(TerrainKind kind, const TerrainParams& params, std::uint64_t seed) {
  params.validate();
  HeightField f;
  f.rows = params.rows();
  f.cols = params.cols();
  f.cell_size_m = params.cell_size_m;
  f.heights.assign(f.rows * f.cols, 0.0);

  const std::uint64_t tile_key = derive_seed(seed, "tiles");
  const std::uint64_t rough_key = derive_seed(seed, "rough");
  for (std::size_t r = 0; r < f.rows; ++r) {
    const double y = static_cast<double>(r) * params.cell_size_m;
    for (std::size_t c = 0; c < f.cols; ++c) {
      const double x = static_cast<double>(c) * params.cell_size_m;
      double h;
      if (kind.family == TerrainFamily::Tiles) {
        const auto ti = static_cast<std::uint64_t>(std::floor(x / params.tile_cell_m));
        const auto tj = static_cast<std::uint64_t>(std::floor(y / params.tile_cell_m));
        h = keyed_uniform(tile_key, ti, tj, -params.tile_height_max_m, params.tile_height_max_m);
      } else {
        h = analytic_height(kind.family, params, x);
      }
      if (kind.rough) h += keyed_uniform(rough_key, r, c, -params.rough_amplitude_m, params.rough_amplitude_m);
      f.heights[r * f.cols + c] = h;
    }
  }
  return f;
}

inline HeightField generate(TerrainKind kind, const TerrainParams& params) {
  return generate(kind, params, params.seed);
}

// Bilinear interpolation; coordinates outside the grid clamp to the border.
// Coordinates within 1e-9 cells of a node snap onto it so node queries return
// the stored value exactly.
inline double height_at(const HeightField& f, double x, double y) {
  auto axis = [](double u, std::size_t n, std::size_t& i0, double& frac) {
    const double hi = static_cast<double>(n - 1);
    if (!(u > 0.0)) u = 0.0;  // also catches NaN
    if (u > hi) u = hi;
    const double nearest = std::round(u);
    if (std::abs(u - nearest) < 1e-9) u = nearest;
    if (n < 2) {
      i0 = 0;
      frac = 0.0;
      return;
    }
    i0 = std::min(static_cast<std::size_t>(u), n - 2);
    frac = u - static_cast<double>(i0);
  };
  std::size_t c0, r0;
  double fx, fy;
  axis((x - f.origin_x) / f.cell_size_m, f.cols, c0, fx);
  axis((y - f.origin_y) / f.cell_size_m, f.rows, r0, fy);
  const std::size_t c1 = std::min(c0 + 1, f.cols - 1);
  const std::size_t r1 = std::min(r0 + 1, f.rows - 1);
  return (1.0 - fx) * (1.0 - fy) * f.node(r0, c0) + fx * (1.0 - fy) * f.node(r0, c1) +
         (1.0 - fx) * fy * f.node(r1, c0) + fx * fy * f.node(r1, c1);
}

struct BasePose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double yaw = 0.0;
};

inline constexpr std::size_t kScanRows = 17;  // along heading
inline constexpr std::size_t kScanCols = 11;  // lateral
inline constexpr std::size_t kScanSize = kScanRows * kScanCols;

using HeightScan = std::array<double, kScanSize>;

// Heights under the base on a 17x11 grid rotated by yaw. Row r is the forward
// offset (r - 8) * spacing, column c the lateral offset (c - 5) * spacing
// (positive = left). Values are terrain minus base z, clipped to +-clip.
inline HeightScan sample_height_grid(const HeightField& f, const BasePose& pose,
                                     double spacing_m = 0.1, double clip_m = 1.0) {
  HeightScan out{};
  const double cy = std::cos(pose.yaw);
  const double sy = std::sin(pose.yaw);
  for (std::size_t r = 0; r < kScanRows; ++r) {
    const double fwd = (static_cast<double>(r) - 8.0) * spacing_m;
    for (std::size_t c = 0; c < kScanCols; ++c) {
      const double lat = (static_cast<double>(c) - 5.0) * spacing_m;
      const double wx = pose.x + cy * fwd - sy * lat;
      const double wy = pose.y + sy * fwd + cy * lat;
      double v = height_at(f, wx, wy) - pose.z;
      if (v > clip_m) v = clip_m;
      if (v < -clip_m) v = -clip_m;
      out[r * kScanCols + c] = v;
    }
  }
  return out;
}

// CSV dump: one header line, then `rows` lines of `cols` comma-separated meters.
inline void write_csv(std::ostream& os, const HeightField& f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", f.cell_size_m);
  os << "# cell_size_m=" << buf;
  std::snprintf(buf, sizeof buf, "%.9g", f.origin_x);
  os << " origin_x_m=" << buf;
  std::snprintf(buf, sizeof buf, "%.9g", f.origin_y);
  os << " origin_y_m=" << buf << " rows=" << f.rows << " cols=" << f.cols << '\n';
  for (std::size_t r = 0; r < f.rows; ++r) {
    for (std::size_t c = 0; c < f.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", f.node(r, c));
      if (c) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace terraincl
