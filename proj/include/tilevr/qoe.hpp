#pragma once

// Logarithmic tile utility, per-FoV quality with the weakest-tile term,
// expected QoE over probable FoVs and the system objective.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "tilevr/core.hpp"

namespace tilevr {

/// U(D) = A ln(B D / D_M).
inline double tile_utility(double rate, const QoeParams& params, const RepresentationLadder& ladder) {
  if (!(rate > 0.0)) throw DomainError("tile utility needs a positive rate");
  double u = params.a * std::log(params.b_for(ladder) * rate / ladder.max());
  if (u < -1e-12) throw DomainError("tile utility would be negative");
  return std::max(u, 0.0);
}

/// Saliency-weighted utility sum over the FoV plus mu times its weakest tile.
inline double fov_quality(std::span<const double> rates, std::span<const double> weights, std::span<const int> fov,
                          double mu, const QoeParams& params, const RepresentationLadder& ladder) {
  if (fov.empty()) throw DomainError("empty FoV");
  double sum = 0.0;
  double weakest = std::numeric_limits<double>::infinity();
  for (int j : fov) {
    double u = tile_utility(rates[static_cast<std::size_t>(j)], params, ladder);
    sum += u * weights[static_cast<std::size_t>(j)];
    weakest = std::min(weakest, u);
  }
  return sum + mu * weakest;
}

inline double expected_user_qoe(std::span<const double> rates, const ProbableFovSet& fovs,
                                std::span<const double> weights, double mu, const QoeParams& params,
                                const RepresentationLadder& ladder) {
  double total = 0.0;
  for (const auto& f : fovs.entries) total += fov_quality(rates, weights, f.tiles, mu, params, ladder) * f.probability;
  return total;
}

inline double user_qoe(const Instance& inst, int user, std::span<const double> rates) {
  return expected_user_qoe(rates, inst.fovs.at(static_cast<std::size_t>(user)), inst.weights_of(user), inst.qoe.mu,
                           inst.qoe, inst.ladder);
}

inline double system_qoe(const Allocation& alloc, const Instance& inst) {
  if (alloc.users.size() != inst.users.size()) throw DomainError("allocation does not match instance users");
  double total = 0.0;
  for (int n = 0; n < inst.user_count(); ++n) total += user_qoe(inst, n, alloc.users[static_cast<std::size_t>(n)].tile_rates);
  return total;
}

/// Per-tile weight in the expected objective: sum over FoVs containing the
/// tile of P_y * W_j.
inline std::vector<double> expected_tile_weights(const ProbableFovSet& fovs, std::span<const double> weights) {
  std::vector<double> out(weights.size(), 0.0);
  for (const auto& f : fovs.entries)
    for (int j : f.tiles) out[static_cast<std::size_t>(j)] += f.probability * weights[static_cast<std::size_t>(j)];
  return out;
}

}  // namespace tilevr
