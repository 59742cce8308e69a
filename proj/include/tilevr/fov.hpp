#pragma once

// Viewport-to-tile mapping under equirectangular projection and the
// probable-FoV enumeration driven by a predicted view center and accuracy.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "tilevr/core.hpp"

namespace tilevr {

namespace detail {

inline constexpr double kOverlapEps = 1e-9;

inline double wrap_yaw(double yaw) {
  double y = std::fmod(yaw + 180.0, 360.0);
  if (y < 0.0) y += 360.0;
  return y - 180.0;
}

inline double interval_overlap(double a0, double a1, double b0, double b1) {
  return std::min(a1, b1) - std::max(a0, b0);
}

/// Overlap of a yaw interval [lo, hi] (hi - lo < 360) with a column, modulo 360.
inline bool yaw_intersects(double lo, double hi, double c0, double c1) {
  for (double shift : {-360.0, 0.0, 360.0})
    if (interval_overlap(lo + shift, hi + shift, c0, c1) > kOverlapEps) return true;
  return false;
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace detail

/// Great-circle angle between two view directions, degrees.
inline double angular_distance(const ViewDirection& a, const ViewDirection& b) {
  using detail::deg2rad;
  double p1 = deg2rad(a.pitch), p2 = deg2rad(b.pitch);
  double dy = deg2rad(a.yaw - b.yaw);
  double sp = std::sin((p2 - p1) / 2.0), sy = std::sin(dy / 2.0);
  double h = sp * sp + std::cos(p1) * std::cos(p2) * sy * sy;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * std::asin(std::sqrt(h)) * 180.0 / std::numbers::pi;
}

/// Tiles whose lat/long rectangle overlaps the FoV rectangle with nonzero
/// area. When the pitch range runs past a pole, rows within the reflected
/// overshoot cover all longitudes.
inline std::vector<int> viewport_tiles(const ViewDirection& center, const FovExtent& extent, const TileGrid& grid) {
  const double cy = detail::wrap_yaw(center.yaw);
  const double lo_p = center.pitch - extent.vertical / 2.0;
  const double hi_p = center.pitch + extent.vertical / 2.0;
  const bool all_yaw = extent.horizontal >= 360.0 - detail::kOverlapEps;
  const bool all_pitch = extent.vertical >= 180.0 - detail::kOverlapEps;
  const double lo_y = cy - extent.horizontal / 2.0;
  const double hi_y = cy + extent.horizontal / 2.0;

  // Latitudes reached by passing over a pole.
  const double north_wrap = hi_p > 90.0 ? 90.0 - (hi_p - 90.0) : 90.0;
  const double south_wrap = lo_p < -90.0 ? -90.0 + (-90.0 - lo_p) : -90.0;

  std::vector<int> out;
  for (int r = 0; r < grid.rows; ++r) {
    auto [p0, p1] = grid.pitch_bounds(r);
    bool polar = (hi_p > 90.0 && detail::interval_overlap(p0, p1, north_wrap, 90.0) > detail::kOverlapEps) ||
                 (lo_p < -90.0 && detail::interval_overlap(p0, p1, -90.0, south_wrap) > detail::kOverlapEps);
    bool in_band = detail::interval_overlap(p0, p1, std::max(lo_p, -90.0), std::min(hi_p, 90.0)) > detail::kOverlapEps;
    if (!polar && !in_band && !all_pitch) continue;
    for (int c = 0; c < grid.cols; ++c) {
      auto [y0, y1] = grid.yaw_bounds(c);
      if (polar || all_yaw || detail::yaw_intersects(lo_y, hi_y, y0, y1)) out.push_back(grid.index(r, c));
    }
  }
  if (out.empty()) {
    // Degenerate extents still see the tile under the center.
    int r = std::clamp(static_cast<int>((90.0 - center.pitch) / grid.tile_height()), 0, grid.rows - 1);
    int c = std::clamp(static_cast<int>((cy + 180.0) / grid.tile_width()), 0, grid.cols - 1);
    out.push_back(grid.index(r, c));
  }
  return out;
}

/// Center direction of a tile.
inline ViewDirection tile_center(int tile, const TileGrid& grid) {
  auto [y0, y1] = grid.yaw_bounds(grid.col_of(tile));
  auto [p0, p1] = grid.pitch_bounds(grid.row_of(tile));
  return {(y0 + y1) / 2.0, (p0 + p1) / 2.0};
}

/// Normalized candidate weights: the predicted center first, then the tile
/// centers not coinciding with it. Spread is chosen so the predicted center
/// carries probability `accuracy`.
struct FovCandidates {
  std::vector<ViewDirection> centers;
  std::vector<double> probability;
  double spread_deg = 0.0;  // 0 means a point mass on the predicted center
};

inline FovCandidates fov_candidates(const FovPrediction& pred, const TileGrid& grid) {
  FovCandidates out;
  out.centers.push_back(pred.center);
  std::vector<double> dist{0.0};
  for (int j = 0; j < grid.tile_count(); ++j) {
    ViewDirection c = tile_center(j, grid);
    double d = angular_distance(c, pred.center);
    if (d < 1e-9) continue;
    out.centers.push_back(c);
    dist.push_back(d);
  }
  const double gamma = pred.accuracy;
  auto head_weight = [&](double s) {
    double sum = 0.0;
    for (std::size_t k = 1; k < dist.size(); ++k) sum += std::exp(-dist[k] * dist[k] / (2.0 * s * s));
    return 1.0 / (1.0 + sum);
  };

  out.probability.assign(out.centers.size(), 0.0);
  if (gamma >= 1.0 - 1e-12 || dist.size() == 1) {
    out.probability[0] = 1.0;
    return out;
  }
  // head_weight decreases from 1 (s -> 0) to 1/K (s -> inf).
  double lo = 1e-3, hi = 1e4;
  if (head_weight(hi) >= gamma) {
    lo = hi;  // accuracy below the uniform floor: use the flattest spread
  } else {
    for (int it = 0; it < 200; ++it) {
      double mid = std::sqrt(lo * hi);
      if (head_weight(mid) > gamma)
        lo = mid;
      else
        hi = mid;
    }
  }
  double s = lo == hi ? hi : std::sqrt(lo * hi);
  out.spread_deg = s;
  double total = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    out.probability[k] = std::exp(-dist[k] * dist[k] / (2.0 * s * s));
    total += out.probability[k];
  }
  for (double& p : out.probability) p /= total;
  return out;
}

/// Probable FoVs from a prediction, merged by tile set, sorted by descending
/// probability and cut at the shortest prefix reaching `guarantee`.
inline ProbableFovSet enumerate_probable_fovs(const FovPrediction& pred, const FovExtent& extent, const TileGrid& grid,
                                              double guarantee) {
  if (!(pred.accuracy > 0.0)) throw DomainError("prediction unusable: accuracy is zero");
  if (!(pred.accuracy <= 1.0)) throw DomainError("prediction accuracy above one");
  if (!(guarantee > 0.0 && guarantee <= 1.0)) throw DomainError("guarantee probability outside (0, 1]");

  FovCandidates cand = fov_candidates(pred, grid);
  std::map<std::vector<int>, double> merged;
  for (std::size_t k = 0; k < cand.centers.size(); ++k) {
    if (!(cand.probability[k] > 0.0)) continue;
    merged[viewport_tiles(cand.centers[k], extent, grid)] += cand.probability[k];
  }
  std::vector<ProbableFov> all;
  for (auto& [tiles, p] : merged) all.push_back({tiles, p});
  std::stable_sort(all.begin(), all.end(),
                   [](const ProbableFov& a, const ProbableFov& b) { return a.probability > b.probability; });

  ProbableFovSet out;
  out.guarantee = guarantee;
  double cum = 0.0;
  for (auto& f : all) {
    out.entries.push_back(std::move(f));
    cum += out.entries.back().probability;
    if (cum >= guarantee - 1e-12) break;
  }
  return out;
}

/// Probability-weighted mean FoV size.
inline double expected_fov_tile_count(const ProbableFovSet& fovs) {
  double num = 0.0, den = 0.0;
  for (const auto& f : fovs.entries) {
    num += static_cast<double>(f.tiles.size()) * f.probability;
    den += f.probability;
  }
  if (!(den > 0.0)) throw DomainError("empty probable-FoV set");
  return num / den;
}

}  // namespace tilevr
