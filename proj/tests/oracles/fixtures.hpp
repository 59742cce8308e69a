#pragma once

// Seeded random instances for oracle comparisons.

#include <algorithm>
#include <vector>

#include "tilevr/core.hpp"
#include "tilevr/random.hpp"

namespace fixtures {

using namespace tilevr;

struct SmallSpec {
  int users = 2;
  int aps = 2;
  int rows = 1;
  int cols = 4;
  int levels = 3;
  int max_fov_tiles = 3;
  int max_fovs = 2;
  double mu = 1.0;
};

inline RepresentationLadder ladder_of(int levels) {
  RepresentationLadder l;
  for (int m = 1; m <= levels; ++m) l.rates.push_back(0.1 * m);
  return l;
}

inline SaliencyMap random_saliency(Rng& rng, int tiles) {
  SaliencyMap w(static_cast<std::size_t>(tiles));
  double s = 0.0;
  for (auto& x : w) {
    x = rng.uniform(0.05, 1.0);
    x = x * x;
    s += x;
  }
  for (auto& x : w) x /= s;
  return w;
}

inline ProbableFovSet random_fovs(Rng& rng, int tiles, int max_tiles, int max_fovs) {
  ProbableFovSet set;
  int count = rng.integer(1, max_fovs);
  double remaining = 1.0;
  for (int y = 0; y < count; ++y) {
    ProbableFov f;
    int size = rng.integer(1, std::min(max_tiles, tiles));
    std::vector<int> all(static_cast<std::size_t>(tiles));
    for (int j = 0; j < tiles; ++j) all[static_cast<std::size_t>(j)] = j;
    for (int k = 0; k < size; ++k) {
      int pick = rng.integer(k, tiles - 1);
      std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick)]);
      f.tiles.push_back(all[static_cast<std::size_t>(k)]);
    }
    std::sort(f.tiles.begin(), f.tiles.end());
    f.probability = y + 1 == count ? remaining : remaining * rng.uniform(0.5, 0.9);
    remaining -= f.probability;
    set.entries.push_back(std::move(f));
  }
  std::stable_sort(set.entries.begin(), set.entries.end(),
                   [](const ProbableFov& a, const ProbableFov& b) { return a.probability > b.probability; });
  return set;
}

/// Random instance whose users can always cover J * D_1.
inline Instance random_instance(std::uint64_t seed, const SmallSpec& spec) {
  Rng rng(seed);
  Instance inst;
  inst.grid = {spec.rows, spec.cols};
  inst.ap_count = spec.aps;
  inst.ladder = ladder_of(spec.levels);
  inst.qoe.mu = spec.mu;
  const int J = inst.tile_count();
  const double q = inst.minimum_user_rate();
  const double full = J * inst.ladder.max();
  for (int n = 0; n < spec.users; ++n) {
    UserState u;
    u.id = n;
    u.video = n;
    u.r_lte = rng.uniform(0.3, 1.0) * full / std::max(1, spec.users);
    for (int i = 0; i < spec.aps; ++i) u.r_wifi.push_back(rng.uniform(0.1, 1.2) * full);
    inst.users.push_back(u);
    inst.saliency.push_back(random_saliency(rng, J));
    inst.fovs.push_back(random_fovs(rng, J, spec.max_fov_tiles, spec.max_fovs));
  }
  // Keep the aggregate minimum demand comfortably feasible.
  for (auto& u : inst.users) u.r_lte = std::max(u.r_lte, 1.05 * q * spec.users);
  return inst;
}

}  // namespace fixtures

#include "tilevr/fov.hpp"

namespace fixtures {

/// Small instance shaped like the full-scale setup: equally spaced ladder
/// prefix, probable FoVs from the viewport model, per-user budgets between
/// J*D_1 and J*D_M.
struct OracleSpec {
  int min_users = 1, max_users = 3;
  int min_aps = 1, max_aps = 2;
  std::vector<std::pair<int, int>> grids{{2, 3}, {2, 4}};
  int min_levels = 3, max_levels = 4;
  double rate_low = 0.25, rate_high = 0.9;  // fractions of J * D_M
};

inline Instance oracle_instance(std::uint64_t seed, const OracleSpec& spec = {}) {
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  Instance inst;
  auto [rows, cols] = spec.grids[static_cast<std::size_t>(rng.integer(0, static_cast<int>(spec.grids.size()) - 1))];
  inst.grid = {rows, cols};
  inst.ap_count = rng.integer(spec.min_aps, spec.max_aps);
  inst.ladder = ladder_of(rng.integer(spec.min_levels, spec.max_levels));
  inst.qoe.mu = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const int N = rng.integer(spec.min_users, spec.max_users);
  const int J = inst.tile_count();
  const double full = J * inst.ladder.max();
  for (int n = 0; n < N; ++n) {
    UserState u;
    u.id = n;
    u.video = n;
    u.r_lte = rng.uniform(spec.rate_low, spec.rate_high) * full;
    for (int i = 0; i < inst.ap_count; ++i) u.r_wifi.push_back(rng.uniform(spec.rate_low, 2.0 * spec.rate_high) * full);
    FovPrediction pred{{rng.uniform(-180.0, 180.0), rng.uniform(-60.0, 60.0)}, rng.uniform(0.6, 1.0)};
    u.prediction = pred;
    inst.users.push_back(u);
    inst.saliency.push_back(random_saliency(rng, J));
    inst.fovs.push_back(enumerate_probable_fovs(pred, FovExtent{}, inst.grid, 0.95));
  }
  return inst;
}

}  // namespace fixtures
