#pragma once

// End-to-end allocation strategies returning discrete, constraint-satisfying
// allocations: exhaustive association search, greedy placement, the penalty
// heuristic, the decomposition with per-user knapsack, and the equal-rate and
// decentralized baselines. Also ladder quantization and the FoV modes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "tilevr/core.hpp"
#include "tilevr/qoe.hpp"
#include "tilevr/solver.hpp"

namespace tilevr {

struct AllocationParams {
  SolverParams solver;
  double multi_ap_threshold = 0.05;  // Mbps, second-largest Wi-Fi rate
  std::int64_t oracle_cap = 100000;  // association vectors
  /// Per-user level vectors the oracle may enumerate for its exact discrete
  /// refinement; larger users fall back to quantized relaxations only.
  std::int64_t oracle_level_cap = 300000;
};

// ---------------------------------------------------------------------------
// Quantization

/// Nearest ladder level, ties to the lower level.
inline int nearest_level(double rate, const RepresentationLadder& ladder) {
  int best = 1;
  double gap = std::abs(rate - ladder.rate(1));
  for (int m = 2; m <= ladder.size(); ++m) {
    double g = std::abs(rate - ladder.rate(m));
    if (g < gap - 1e-12) {
      best = m;
      gap = g;
    }
  }
  return best;
}

/// Rounds each tile to the nearest ladder value, then lowers levels until
/// each user's discrete sum fits within its fractional sum. Each step lowers
/// the tile whose one-level decrease costs the least expected QoE (utility
/// loss times expected weight, plus the weakest-tile term when mu > 0); ties
/// by lower tile. Leftover rate is not reused.
inline Allocation quantize_allocation(const Allocation& fractional, const Instance& inst) {
  Allocation out = fractional;
  const auto& ladder = inst.ladder;
  for (int n = 0; n < inst.user_count(); ++n) {
    auto& ua = out.users[static_cast<std::size_t>(n)];
    const double target = std::accumulate(ua.tile_rates.begin(), ua.tile_rates.end(), 0.0);
    ua.levels.assign(ua.tile_rates.size(), 1);
    std::vector<double> rates(ua.tile_rates.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < ua.tile_rates.size(); ++j) {
      ua.levels[j] = nearest_level(ua.tile_rates[j], ladder);
      rates[j] = ladder.rate(ua.levels[j]);
      sum += rates[j];
    }
    while (sum > target + 1e-12) {
      const double now = user_qoe(inst, n, rates);
      int pick = -1;
      double least = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < ua.levels.size(); ++j) {
        int m = ua.levels[j];
        if (m <= 1) continue;
        rates[j] = ladder.rate(m - 1);
        double loss = now - user_qoe(inst, n, rates);
        rates[j] = ladder.rate(m);
        if (loss < least - 1e-15) {
          least = loss;
          pick = static_cast<int>(j);
        }
      }
      if (pick < 0) break;
      auto p = static_cast<std::size_t>(pick);
      --ua.levels[p];
      sum -= rates[p] - ladder.rate(ua.levels[p]);
      rates[p] = ladder.rate(ua.levels[p]);
    }
    ua.tile_rates = rates;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-user knapsack over representation upgrades

struct KnapsackItem {
  int tile = 0;
  int level = 0;       // candidate level
  double cost = 0.0;   // Mbps above the currently selected level
  double gain = 0.0;   // utility gain times expected tile weight
  double score = 0.0;  // gain / (cost / r_n)
};

/// Greedy utility-over-cost selection. Every tile first takes level 1; the
/// remaining budget then goes to the highest-scoring upgrade that still fits
/// (ties by lower tile, then lower level). Tiles outside every probable FoV
/// stay at level 1. `link_rate` is r_n and only scales scores.
inline std::vector<int> knapsack_tiles(std::span<const double> weights, const ProbableFovSet& fovs,
                                       const RepresentationLadder& ladder, const QoeParams& params, double link_rate,
                                       double budget) {
  const int J = static_cast<int>(weights.size());
  const double floor = J * ladder.min();
  if (budget < floor - 1e-9)
    throw InfeasibleError(detail::cat("minimum representations infeasible: tile_budget ", budget, " < ", floor));
  std::vector<double> wbar = expected_tile_weights(fovs, weights);
  std::vector<double> util(static_cast<std::size_t>(ladder.size() + 1), 0.0);
  for (int m = 1; m <= ladder.size(); ++m) util[static_cast<std::size_t>(m)] = tile_utility(ladder.rate(m), params, ladder);
  const double r = link_rate > 0.0 ? link_rate : 1.0;

  std::vector<int> levels(static_cast<std::size_t>(J), 1);
  double left = budget - floor;
  while (true) {
    KnapsackItem best;
    best.score = -1.0;
    for (int j = 0; j < J; ++j) {
      double w = wbar[static_cast<std::size_t>(j)];
      if (!(w > 0.0)) continue;
      int cur = levels[static_cast<std::size_t>(j)];
      for (int m = cur + 1; m <= ladder.size(); ++m) {
        double cost = ladder.rate(m) - ladder.rate(cur);
        if (cost > left + 1e-12) break;
        double gain = (util[static_cast<std::size_t>(m)] - util[static_cast<std::size_t>(cur)]) * w;
        double score = gain / (cost / r);
        if (score > best.score) best = {j, m, cost, gain, score};
      }
    }
    if (best.score < 0.0) break;
    levels[static_cast<std::size_t>(best.tile)] = best.level;
    left -= best.cost;
  }
  return levels;
}

// ---------------------------------------------------------------------------
// Helpers

namespace detail {

inline std::vector<double> level_rates(const std::vector<int>& levels, const RepresentationLadder& ladder) {
  std::vector<double> out;
  out.reserve(levels.size());
  for (int m : levels) out.push_back(ladder.rate(m));
  return out;
}

/// Discrete allocation from per-user rates and knapsack levels.
inline Allocation knapsack_finish(const Instance& inst, const Allocation& rates) {
  Allocation out = rates;
  for (int n = 0; n < inst.user_count(); ++n) {
    auto& ua = out.users[static_cast<std::size_t>(n)];
    const auto& u = inst.users[static_cast<std::size_t>(n)];
    double link = u.r_lte + (ua.ap == kNoAp ? 0.0 : u.r_wifi[static_cast<std::size_t>(ua.ap)]);
    ua.levels = knapsack_tiles(inst.weights_of(n), inst.fovs[static_cast<std::size_t>(n)], inst.ladder, inst.qoe, link,
                               ua.transmission_rate());
    ua.tile_rates = level_rates(ua.levels, inst.ladder);
  }
  return out;
}

inline Allocation solve_and_quantize(const Instance& inst, std::span<const int> assoc, const SolverParams& params) {
  SolverParams cold = params;
  cold.warm_start.reset();
  cold.record_trace = false;
  return quantize_allocation(solve_fixed_assoc(inst, assoc, cold).allocation, inst);
}

/// Best discrete value of one user for every achievable tile-rate sum,
/// pruned to the increasing frontier. Empty when enumeration exceeds `cap`.
struct Frontier {
  std::vector<double> sum;
  std::vector<double> value;
  std::vector<std::vector<int>> levels;
};

inline Frontier discrete_frontier(const Instance& inst, int n, std::int64_t cap) {
  const auto& ladder = inst.ladder;
  const int J = inst.tile_count();
  const int M = ladder.size();
  std::vector<double> wbar = expected_tile_weights(inst.fovs[static_cast<std::size_t>(n)], inst.weights_of(n));
  std::vector<int> live;
  for (const auto& f : inst.fovs[static_cast<std::size_t>(n)].entries)
    for (int j : f.tiles) live.push_back(j);
  std::sort(live.begin(), live.end());
  live.erase(std::unique(live.begin(), live.end()), live.end());
  double combos = std::pow(double(M), double(live.size()));
  if (combos > double(cap)) return {};

  std::map<std::int64_t, std::pair<double, std::vector<int>>> best;  // sum in 1e-9 units
  std::vector<int> levels(static_cast<std::size_t>(J), 1);
  std::vector<int> idx(live.size(), 1);
  while (true) {
    for (std::size_t k = 0; k < live.size(); ++k) levels[static_cast<std::size_t>(live[k])] = idx[k];
    auto rates = level_rates(levels, ladder);
    double s = std::accumulate(rates.begin(), rates.end(), 0.0);
    double v = user_qoe(inst, n, rates);
    auto key = static_cast<std::int64_t>(std::llround(s * 1e9));
    auto it = best.find(key);
    if (it == best.end() || v > it->second.first) best[key] = {v, levels};
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] > M) idx[k++] = 1;
    if (k == idx.size()) break;
  }
  Frontier f;
  double top = -std::numeric_limits<double>::infinity();
  for (auto& [key, entry] : best) {
    if (entry.first <= top) continue;
    top = entry.first;
    f.sum.push_back(double(key) * 1e-9);
    f.value.push_back(entry.first);
    f.levels.push_back(entry.second);
  }
  return f;
}

/// Exact discrete optimum for a fixed association given per-user frontiers.
/// Returns false when no combination of tile sums is coverable.
inline bool best_discrete_for_assoc(const Instance& inst, std::span<const int> assoc,
                                    const std::vector<Frontier>& fronts, double& best_value, Allocation& best_alloc) {
  const int N = inst.user_count();
  std::vector<std::size_t> pick(static_cast<std::size_t>(N), 0);
  std::vector<double> demand(static_cast<std::size_t>(N));
  bool found = false;
  ConcaveProgram layout = make_program(inst, assoc, false, {}, 0.0);
  while (true) {
    double v = 0.0;
    for (int n = 0; n < N; ++n) {
      demand[static_cast<std::size_t>(n)] = fronts[static_cast<std::size_t>(n)].sum[pick[static_cast<std::size_t>(n)]];
      v += fronts[static_cast<std::size_t>(n)].value[pick[static_cast<std::size_t>(n)]];
    }
    if (v > best_value + 1e-12 || !found) {
      try {
        std::vector<double> z = minimum_coverage(inst, assoc, demand);
        if (v > best_value + 1e-12) {
          spread_leftover(layout, z);
          Allocation a;
          for (int n = 0; n < N; ++n) {
            UserAllocation ua;
            ua.ap = assoc[static_cast<std::size_t>(n)];
            ua.d_lte = z[layout.at(n, 0)] * layout.rate[layout.at(n, 0)];
            ua.d_wifi.assign(static_cast<std::size_t>(inst.ap_count), 0.0);
            for (int i = 0; i < inst.ap_count; ++i)
              ua.d_wifi[static_cast<std::size_t>(i)] = z[layout.at(n, i + 1)] * layout.rate[layout.at(n, i + 1)];
            ua.levels = fronts[static_cast<std::size_t>(n)].levels[pick[static_cast<std::size_t>(n)]];
            ua.tile_rates = level_rates(ua.levels, inst.ladder);
            a.users.push_back(std::move(ua));
          }
          best_value = v;
          best_alloc = std::move(a);
        }
        found = true;
      } catch (const InfeasibleError&) {
      }
    }
    int n = 0;
    while (n < N && ++pick[static_cast<std::size_t>(n)] == fronts[static_cast<std::size_t>(n)].sum.size())
      pick[static_cast<std::size_t>(n++)] = 0;
    if (n == N) break;
  }
  return found;
}

inline std::int64_t association_count(const Instance& inst) {
  if (inst.ap_count <= 1) return 1;
  double count = std::pow(double(inst.ap_count), double(inst.user_count()));
  return count > 9e18 ? std::numeric_limits<std::int64_t>::max() : static_cast<std::int64_t>(count);
}

/// Association vector with index `code` in lexicographic order (user 0 most
/// significant).
inline std::vector<int> association_at(const Instance& inst, std::int64_t code) {
  std::vector<int> a(static_cast<std::size_t>(inst.user_count()), inst.ap_count == 0 ? kNoAp : 0);
  if (inst.ap_count <= 1) return a;
  for (int n = inst.user_count() - 1; n >= 0; --n) {
    a[static_cast<std::size_t>(n)] = static_cast<int>(code % inst.ap_count);
    code /= inst.ap_count;
  }
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Strategies

/// Best discrete allocation over all I^N associations. For each association
/// the quantized relaxed solution is scored and, when every user's live
/// tiles are small enough to enumerate, so is the exact discrete optimum for
/// that association. Strict improvement only, so ties keep the
/// lexicographically first association.
inline Allocation exhaustive_oracle(const Instance& inst, const AllocationParams& params = {}) {
  std::int64_t total = detail::association_count(inst);
  if (total > params.oracle_cap)
    throw DomainError(detail::cat("exhaustive search over ", inst.ap_count, "^", inst.user_count(),
                                  " associations exceeds cap ", params.oracle_cap));
  if (inst.user_count() == 0) return {};

  std::vector<detail::Frontier> fronts;
  bool exact = true;
  for (int n = 0; n < inst.user_count() && exact; ++n) {
    fronts.push_back(detail::discrete_frontier(inst, n, params.oracle_level_cap));
    exact = !fronts.back().sum.empty();
  }

  double best = -std::numeric_limits<double>::infinity();
  Allocation best_alloc;
  for (std::int64_t code = 0; code < total; ++code) {
    std::vector<int> assoc = detail::association_at(inst, code);
    try {
      Allocation a = detail::solve_and_quantize(inst, assoc, params.solver);
      double v = system_qoe(a, inst);
      if (v > best) {
        best = v;
        best_alloc = std::move(a);
      }
    } catch (const InfeasibleError&) {
      continue;
    }
    if (exact) detail::best_discrete_for_assoc(inst, assoc, fronts, best, best_alloc);
  }
  if (best_alloc.users.empty())
    throw InfeasibleError("minimum representations infeasible under every association");
  return best_alloc;
}

/// Greedy user-by-user placement on the relaxed objective, then a full
/// fixed-association solve and quantization.
inline Allocation greedy_assoc(const Instance& inst, const AllocationParams& params = {}) {
  if (inst.user_count() == 0) return {};
  SolverParams cold = params.solver;
  cold.warm_start.reset();
  cold.record_trace = false;
  std::vector<int> assoc(static_cast<std::size_t>(inst.user_count()), kUnplaced);
  assoc = greedy_placement(inst, std::move(assoc), [&](const Instance& sub, std::span<const int> a) {
    return solve_fixed_assoc(sub, a, cold).objective;
  });
  return detail::solve_and_quantize(inst, assoc, params.solver);
}

/// Association chosen by the penalty heuristic before the final solve.
inline std::vector<int> penalty_association(const Instance& inst, const AllocationParams& params = {}) {
  SolverSolution relaxed = solve_opt2(inst, params.solver);
  std::vector<int> assoc = threshold_association(inst, relaxed.allocation, params.multi_ap_threshold);
  SolverParams cold = params.solver;
  cold.warm_start.reset();
  cold.record_trace = false;
  return greedy_placement(inst, std::move(assoc), [&](const Instance& sub, std::span<const int> a) {
    return solve_fixed_assoc(sub, a, cold).objective;
  });
}

/// Penalized relaxation, threshold on the second-largest Wi-Fi rate, greedy
/// re-association of the ambiguous users, fixed-association solve and
/// quantization.
inline Allocation penalty_heuristic(const Instance& inst, const AllocationParams& params = {}) {
  if (inst.user_count() == 0) return {};
  std::vector<int> assoc = penalty_association(inst, params);
  return detail::solve_and_quantize(inst, assoc, params.solver);
}

/// User-rate relaxation for association and rates, then per-user knapsack.
inline Allocation decomposition(const Instance& inst, const AllocationParams& params = {}) {
  if (inst.user_count() == 0) return {};
  SolverSolution rates = solve_opt3(inst, params.solver, params.multi_ap_threshold);
  return detail::knapsack_finish(inst, rates.allocation);
}

/// Copy of the instance with each user's saliency replaced by uniform weight
/// over the union of its probable-FoV tiles.
inline Instance uniform_fov_weights(const Instance& inst) {
  Instance out = inst;
  out.saliency.clear();
  for (int n = 0; n < inst.user_count(); ++n) {
    SaliencyMap w(static_cast<std::size_t>(inst.tile_count()), 0.0);
    int count = 0;
    for (const auto& f : inst.fovs[static_cast<std::size_t>(n)].entries)
      for (int j : f.tiles)
        if (w[static_cast<std::size_t>(j)] == 0.0) {
          w[static_cast<std::size_t>(j)] = 1.0;
          ++count;
        }
    if (count == 0) {
      std::fill(w.begin(), w.end(), 1.0);
      count = inst.tile_count();
    }
    for (auto& x : w) x /= count;
    out.saliency.push_back(std::move(w));
    out.users[static_cast<std::size_t>(n)].video = n;
  }
  return out;
}

/// Penalty heuristic run on saliency-blind weights.
inline Allocation equal_rate_baseline(const Instance& inst, const AllocationParams& params = {}) {
  return penalty_heuristic(uniform_fov_weights(inst), params);
}

namespace detail {

/// Splits `share` of one resource among users maximizing
/// sum_n V_n(base_n + x_n r_n) by bisection on the common multiplier.
inline std::vector<double> split_pool(const std::vector<const UserValue*>& values, const std::vector<double>& base,
                                      const std::vector<double>& rate, double share) {
  const std::size_t K = values.size();
  std::vector<double> x(K, 0.0);
  if (K == 0 || share <= 0.0) return x;
  // Share user k takes at multiplier lam: largest x with V'(base + x r) r >= lam.
  auto take = [&](std::size_t k, double lam) {
    double r = rate[k];
    if (!(r > 0.0)) return 0.0;
    double cap = std::max(0.0, (values[k]->saturation_rate() - base[k]) / r);
    cap = std::min(cap, share);
    if (values[k]->slope(base[k]) * r < lam) return 0.0;
    double lo = 0.0, hi = cap;
    if (values[k]->slope(base[k] + hi * r) * r >= lam) return hi;
    for (int it = 0; it < 100; ++it) {
      double mid = 0.5 * (lo + hi);
      if (values[k]->slope(base[k] + mid * r) * r >= lam)
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  };
  auto total = [&](double lam) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += take(k, lam);
    return s;
  };
  if (total(1e-15) <= share) {
    for (std::size_t k = 0; k < K; ++k) x[k] = take(k, 1e-15);
  } else {
    double lo = 1e-15, hi = 1.0;
    while (total(hi) > share) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      double mid = std::sqrt(lo * hi);
      if (total(mid) > share)
        lo = mid;
      else
        hi = mid;
    }
    for (std::size_t k = 0; k < K; ++k) x[k] = take(k, hi);
  }
  // Never exceed the pool share.
  double s = std::accumulate(x.begin(), x.end(), 0.0);
  if (s > share)
    for (auto& v : x) v *= share / s;
  return x;
}

}  // namespace detail

/// Strongest-AP association; the networks split their capacity without a
/// joint optimization. Each user first receives its minimum-coverage share.
/// Every AP then divides its leftover among its users given their covered
/// rates, and LTE finally divides its leftover given the resulting rates.
/// Tiles by knapsack.
inline Allocation decentralized_baseline(const Instance& inst, const AllocationParams& params = {}) {
  (void)params;
  if (inst.user_count() == 0) return {};
  std::vector<int> assoc;
  for (const auto& u : inst.users) assoc.push_back(detail::strongest_ap(u));
  std::vector<double> z = detail::minimum_coverage(inst, assoc);
  ConcaveProgram layout = detail::make_program(inst, assoc, false, {}, 0.0);
  std::vector<double> covered(static_cast<std::size_t>(layout.users));
  for (int n = 0; n < layout.users; ++n) covered[static_cast<std::size_t>(n)] = layout.user_rate(z, n);
  auto split = [&](int k, const std::vector<double>& base_rate) {
    std::vector<const UserValue*> vals;
    std::vector<double> base, rate;
    std::vector<int> who;
    double used = 0.0;
    for (int n = 0; n < layout.users; ++n) {
      double r = layout.rate[layout.at(n, k)];
      if (r == 0.0) continue;
      used += z[layout.at(n, k)];
      vals.push_back(&layout.value[static_cast<std::size_t>(n)]);
      base.push_back(base_rate[static_cast<std::size_t>(n)]);
      rate.push_back(r);
      who.push_back(n);
    }
    std::vector<double> extra = detail::split_pool(vals, base, rate, std::max(0.0, 1.0 - used));
    for (std::size_t t = 0; t < who.size(); ++t) z[layout.at(who[t], k)] += extra[t];
  };
  // APs act on coverage alone; their users are disjoint.
  for (int k = 1; k < layout.resources; ++k) split(k, covered);
  std::vector<double> after_wifi(static_cast<std::size_t>(layout.users));
  for (int n = 0; n < layout.users; ++n) after_wifi[static_cast<std::size_t>(n)] = layout.user_rate(z, n);
  split(0, after_wifi);
  Allocation rates;
  for (int n = 0; n < inst.user_count(); ++n) {
    UserAllocation ua;
    ua.ap = assoc[static_cast<std::size_t>(n)];
    ua.d_lte = z[layout.at(n, 0)] * layout.rate[layout.at(n, 0)];
    ua.d_wifi.assign(static_cast<std::size_t>(inst.ap_count), 0.0);
    for (int i = 0; i < inst.ap_count; ++i)
      ua.d_wifi[static_cast<std::size_t>(i)] = z[layout.at(n, i + 1)] * layout.rate[layout.at(n, i + 1)];
    rates.users.push_back(std::move(ua));
  }
  return detail::knapsack_finish(inst, rates);
}

// ---------------------------------------------------------------------------
// Strategy selection

enum class Strategy { exhaustive, greedy, penalty, decomposition, equal_rate, decentralized };

/// How probable FoVs feed a strategy.
enum class FovMode {
  predicted,  // probable-FoV sets as given
  one_fov,    // only the most probable FoV, with probability one
  broadcast,  // no prediction: one FoV of every tile
};

inline constexpr std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::exhaustive: return "exhaustive";
    case Strategy::greedy: return "greedy";
    case Strategy::penalty: return "penalty";
    case Strategy::decomposition: return "decomposition";
    case Strategy::equal_rate: return "equal_rate";
    case Strategy::decentralized: return "decentralized";
  }
  return "unknown";
}

inline Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::exhaustive, Strategy::greedy, Strategy::penalty, Strategy::decomposition,
                     Strategy::equal_rate, Strategy::decentralized})
    if (strategy_name(s) == name) return s;
  throw ConfigError(detail::cat("unknown strategy '", name, "'"));
}

inline constexpr std::string_view fov_mode_name(FovMode m) {
  switch (m) {
    case FovMode::predicted: return "predicted";
    case FovMode::one_fov: return "one_fov";
    case FovMode::broadcast: return "broadcast";
  }
  return "unknown";
}

inline FovMode parse_fov_mode(std::string_view name) {
  for (FovMode m : {FovMode::predicted, FovMode::one_fov, FovMode::broadcast})
    if (fov_mode_name(m) == name) return m;
  throw ConfigError(detail::cat("unknown FoV mode '", name, "'"));
}

/// Instance seen by a strategy under the given FoV mode.
inline Instance with_fov_mode(const Instance& inst, FovMode mode) {
  if (mode == FovMode::predicted) return inst;
  Instance out = inst;
  for (auto& set : out.fovs) {
    if (mode == FovMode::broadcast || set.entries.empty()) {
      set = ProbableFovSet::whole_frame(inst.tile_count());
    } else {
      ProbableFov top = set.entries.front();
      top.probability = 1.0;
      set.entries = {top};
      set.guarantee = 1.0;
    }
  }
  return out;
}

inline Allocation run_strategy(const Instance& inst, Strategy s, const AllocationParams& params = {},
                               FovMode mode = FovMode::predicted) {
  Instance view = with_fov_mode(inst, mode);
  switch (s) {
    case Strategy::exhaustive: return exhaustive_oracle(view, params);
    case Strategy::greedy: return greedy_assoc(view, params);
    case Strategy::penalty: return penalty_heuristic(view, params);
    case Strategy::decomposition: return decomposition(view, params);
    case Strategy::equal_rate: return equal_rate_baseline(view, params);
    case Strategy::decentralized: return decentralized_baseline(view, params);
  }
  throw DomainError("unknown strategy");
}

}  // namespace tilevr
