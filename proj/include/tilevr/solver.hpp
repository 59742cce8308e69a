#pragma once

// Continuous relaxations of the allocation problem.
//
// Each user's best expected QoE for a transmission budget d is a concave,
// piecewise-smooth function V_n(d). With the min terms folded into pooled
// per-tile weights (exact, computed once per user by max-closure splitting),
// the tile rates for a budget follow D_j = clamp(A rho_j / lambda, D_1, D_M)
// with lambda found from sorted breakpoints. The outer problem over resource
// shares is solved by spectral projected gradient with a monotone Armijo
// search; projection onto capacity simplices intersected with per-user
// coverage half-spaces uses Dykstra's algorithm.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "tilevr/core.hpp"
#include "tilevr/detail/maxflow.hpp"
#include "tilevr/fov.hpp"
#include "tilevr/qoe.hpp"

namespace tilevr {

/// Per-user rate utility used by the user-rate relaxation.
enum class Opt3Utility {
  average_tile,  // Omega * U(clamp(d / expected FoV size))
  aggregate,     // Omega * U(clamp(d / J)) evaluated against the full frame
};

struct SolverParams {
  double sigma = 0.1;
  int max_iterations = 10000;
  double objective_tolerance = 1e-6;  // relative
  double feasibility_tolerance = 1e-8;
  double armijo = 1e-4;
  double backtrack = 0.5;
  Opt3Utility opt3_utility = Opt3Utility::average_tile;
  /// Shares laid out user-major over (LTE, AP 1..I); projected before use.
  std::optional<std::vector<double>> warm_start;
  bool record_trace = false;
};

struct SolverSolution {
  Allocation allocation;        // fractional rates
  std::vector<double> shares;   // user-major over (LTE, AP 1..I)
  double objective = 0.0;       // including penalty
  double penalty = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;    // accepted objective values when requested
};

// ---------------------------------------------------------------------------
// Per-user value function

namespace detail {

struct PoolFov {
  std::vector<int> tiles;
  double mass;
};

inline void pool_block(const std::vector<int>& tiles, const std::vector<PoolFov>& fovs, const std::vector<double>& wbar,
                       std::vector<double>& rho, int depth = 0) {
  if (tiles.empty()) return;
  double total = 0.0, scale = 0.0;
  for (int j : tiles) {
    total += wbar[static_cast<std::size_t>(j)];
    scale += std::abs(wbar[static_cast<std::size_t>(j)]);
  }
  for (const auto& f : fovs) {
    total += f.mass;
    scale += f.mass;
  }
  const double v = total / static_cast<double>(tiles.size());
  auto assign = [&] {
    for (int j : tiles) rho[static_cast<std::size_t>(j)] = v;
  };
  if (fovs.empty() || tiles.size() == 1 || depth > 64) {
    // Without min terms nothing couples tiles: each keeps its own weight.
    if (fovs.empty()) {
      for (int j : tiles) rho[static_cast<std::size_t>(j)] = wbar[static_cast<std::size_t>(j)];
    } else {
      assign();
    }
    return;
  }

  // Max closure: FoV nodes (profit = mass) require all their tiles
  // (profit = wbar - v).
  const int nt = static_cast<int>(tiles.size());
  const int nf = static_cast<int>(fovs.size());
  const int s = nt + nf, t = s + 1;
  std::vector<int> local(wbar.size(), -1);
  for (int k = 0; k < nt; ++k) local[static_cast<std::size_t>(tiles[static_cast<std::size_t>(k)])] = k;

  MaxFlow flow(nt + nf + 2);
  double positive = 0.0;
  const double inf = 1e6 * (1.0 + scale);
  for (int k = 0; k < nt; ++k) {
    double p = wbar[static_cast<std::size_t>(tiles[static_cast<std::size_t>(k)])] - v;
    if (p > 0.0) {
      flow.add_edge(s, k, p);
      positive += p;
    } else if (p < 0.0) {
      flow.add_edge(k, t, -p);
    }
  }
  for (int y = 0; y < nf; ++y) {
    const auto& f = fovs[static_cast<std::size_t>(y)];
    flow.add_edge(s, nt + y, f.mass);
    positive += f.mass;
    for (int j : f.tiles) flow.add_edge(nt + y, local[static_cast<std::size_t>(j)], inf);
  }
  double cut = flow.run(s, t);
  double gain = positive - cut;
  if (!(gain > 1e-12 * (1.0 + scale))) {
    assign();
    return;
  }
  auto side = flow.source_side(s);
  std::vector<int> upper, lower;
  std::vector<char> in_upper(wbar.size(), 0);
  for (int k = 0; k < nt; ++k) {
    int j = tiles[static_cast<std::size_t>(k)];
    if (side[static_cast<std::size_t>(k)]) {
      upper.push_back(j);
      in_upper[static_cast<std::size_t>(j)] = 1;
    } else {
      lower.push_back(j);
    }
  }
  if (upper.empty() || lower.empty()) {
    assign();
    return;
  }
  std::vector<PoolFov> up_f, low_f;
  for (const auto& f : fovs) {
    PoolFov rest{{}, f.mass};
    for (int j : f.tiles)
      if (!in_upper[static_cast<std::size_t>(j)]) rest.tiles.push_back(j);
    if (rest.tiles.empty())
      up_f.push_back(f);
    else
      low_f.push_back(std::move(rest));
  }
  pool_block(upper, up_f, wbar, rho, depth + 1);
  pool_block(lower, low_f, wbar, rho, depth + 1);
}

}  // namespace detail

/// Pooled per-tile weights rho_j: the optimal relaxed rates for any budget
/// are clamp(A rho_j / lambda, D_1, D_M).
inline std::vector<double> pooled_tile_weights(const ProbableFovSet& fovs, std::span<const double> weights, double mu) {
  std::vector<double> wbar = expected_tile_weights(fovs, weights);
  std::vector<detail::PoolFov> pf;
  if (mu > 0.0)
    for (const auto& f : fovs.entries)
      if (f.probability > 0.0) pf.push_back({f.tiles, mu * f.probability});
  std::vector<int> all(wbar.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> rho(wbar.size(), 0.0);
  detail::pool_block(all, pf, wbar, rho);
  return rho;
}

/// Concave value of a transmission budget for one user.
class UserValue {
 public:
  enum class Kind { exact, opt3 };

  /// Exact relaxed expected QoE with optimal tile split.
  static UserValue exact(const Instance& inst, int user) {
    UserValue u;
    u.kind_ = Kind::exact;
    u.init_common(inst, user);
    u.rho_ = pooled_tile_weights(*u.fovs_, *u.weights_, inst.qoe.mu);
    u.sat_ = 0.0;
    for (double r : u.rho_) u.sat_ += r > 0.0 ? u.dm_ : u.d1_;
    for (double r : u.rho_) {
      if (r > 0.0) {
        u.breaks_.push_back(u.a_ * r / u.d1_);
        u.breaks_.push_back(u.a_ * r / u.dm_);
      }
    }
    std::sort(u.breaks_.begin(), u.breaks_.end());
    double rho_max = u.rho_.empty() ? 0.0 : *std::max_element(u.rho_.begin(), u.rho_.end());
    u.floor_slope_ = u.a_ * rho_max / u.d1_;
    return u;
  }

  /// Single-rate utility Omega * U(d / size) of the user-rate relaxation.
  static UserValue opt3(const Instance& inst, int user, Opt3Utility form) {
    UserValue u = exact(inst, user);
    u.kind_ = Kind::opt3;
    u.omega_ = 0.0;
    for (const auto& f : u.fovs_->entries)
      for (int j : f.tiles) u.omega_ += f.probability * (*u.weights_)[static_cast<std::size_t>(j)];
    u.size_ = form == Opt3Utility::average_tile ? expected_fov_tile_count(*u.fovs_) : double(inst.tile_count());
    return u;
  }

  Kind kind() const { return kind_; }
  double floor_rate() const { return floor_; }
  /// Budget above which extra rate buys nothing.
  double saturation_rate() const { return kind_ == Kind::exact ? sat_ : std::max(floor_, size_ * dm_); }
  const std::vector<double>& pooled_weights() const { return rho_; }

  double value(double d) const {
    if (kind_ == Kind::opt3) {
      double lo = size_ * d1_, hi = size_ * dm_;
      double per = std::clamp(d, lo, hi) / size_;
      double base = omega_ * tile_utility(per, *params_, *ladder_);
      if (d < lo) base += opt3_slope_at(lo) * (d - lo);
      return base;
    }
    if (d < floor_) return value(floor_) + floor_slope_ * (d - floor_);
    auto rates = tile_rates(d);
    return expected_user_qoe(rates, *fovs_, *weights_, mu_, *params_, *ladder_);
  }

  /// Right derivative of value().
  double slope(double d) const {
    if (kind_ == Kind::opt3) {
      double lo = size_ * d1_, hi = size_ * dm_;
      if (d >= hi) return 0.0;
      return opt3_slope_at(std::max(d, lo));
    }
    if (d < floor_) return floor_slope_;
    if (d >= sat_) return 0.0;
    return lambda(d);
  }

  /// Multiplier of the budget constraint at budget d, floor < d < saturation.
  double lambda(double d) const {
    auto supply = [&](double lam) {
      double s = 0.0;
      for (double r : rho_) s += std::clamp(a_ * r / lam, d1_, dm_);
      return s;
    };
    // supply() is non-increasing in lambda; breakpoints ascending.
    std::size_t k = 0;
    while (k < breaks_.size() && supply(breaks_[k]) > d) ++k;
    if (k == breaks_.size()) return breaks_.empty() ? 0.0 : breaks_.back();
    if (k == 0) return breaks_.front();
    double lo = breaks_[k - 1], hi = breaks_[k];
    double mid = 0.5 * (lo + hi);
    double fixed = 0.0, free_rho = 0.0;
    for (double r : rho_) {
      double x = a_ * r / mid;
      if (x <= d1_)
        fixed += d1_;
      else if (x >= dm_)
        fixed += dm_;
      else
        free_rho += r;
    }
    if (!(free_rho > 0.0) || !(d - fixed > 0.0)) return hi;
    return std::clamp(a_ * free_rho / (d - fixed), lo, hi);
  }

  /// Optimal fractional tile rates for budget d (all D_1 below the floor).
  std::vector<double> tile_rates(double d) const {
    std::vector<double> out(rho_.size(), d1_);
    if (d <= floor_) return out;
    if (d >= sat_) {
      for (std::size_t j = 0; j < rho_.size(); ++j) out[j] = rho_[j] > 0.0 ? dm_ : d1_;
      return out;
    }
    double lam = lambda(d);
    for (std::size_t j = 0; j < rho_.size(); ++j) out[j] = std::clamp(a_ * rho_[j] / lam, d1_, dm_);
    // Remove rounding drift so the tile sum never exceeds the budget.
    double sum = std::accumulate(out.begin(), out.end(), 0.0);
    if (sum > d) {
      double excess = sum - d;
      for (std::size_t j = 0; j < out.size() && excess > 0.0; ++j) {
        double cut = std::min(excess, out[j] - d1_);
        out[j] -= cut;
        excess -= cut;
      }
    }
    return out;
  }

 private:
  void init_common(const Instance& inst, int user) {
    fovs_ = &inst.fovs.at(static_cast<std::size_t>(user));
    weights_ = &inst.weights_of(user);
    params_ = &inst.qoe;
    ladder_ = &inst.ladder;
    mu_ = inst.qoe.mu;
    a_ = inst.qoe.a;
    d1_ = inst.ladder.min();
    dm_ = inst.ladder.max();
    floor_ = inst.minimum_user_rate();
  }

  double opt3_slope_at(double d) const { return omega_ * a_ / d; }

  Kind kind_ = Kind::exact;
  const ProbableFovSet* fovs_ = nullptr;
  const SaliencyMap* weights_ = nullptr;
  const QoeParams* params_ = nullptr;
  const RepresentationLadder* ladder_ = nullptr;
  double mu_ = 0.0, a_ = 1.0, d1_ = 0.0, dm_ = 0.0;
  double floor_ = 0.0, sat_ = 0.0, floor_slope_ = 0.0;
  std::vector<double> rho_;
  std::vector<double> breaks_;
  double omega_ = 0.0, size_ = 1.0;
};

/// Relaxed optimal tile rates of one user for a given budget.
inline std::vector<double> relaxed_tile_rates(const Instance& inst, int user, double budget) {
  return UserValue::exact(inst, user).tile_rates(budget);
}

// ---------------------------------------------------------------------------
// Outer program over resource shares

/// Shares z[n][k] of resource k (0 = LTE, 1..I = APs) given to user n.
/// Rate d_n = sum_k z[n][k] r[n][k]; capacities sum_n z[n][k] <= 1;
/// coverage d_n >= floor_n. Variables with zero rate or excluded by a fixed
/// association stay at zero.
struct ConcaveProgram {
  int users = 0;
  int resources = 0;
  std::vector<double> rate;    // users * resources; 0 marks an inactive variable
  std::vector<double> floor;   // per user
  std::vector<UserValue> value;
  double sigma = 0.0;          // penalty on the l2 norm of per-user Wi-Fi rates
  double smooth = 0.0;         // relative half-width of the rounded saturation kink

  std::size_t at(int n, int k) const { return static_cast<std::size_t>(n * resources + k); }
  std::size_t size() const { return rate.size(); }

  double user_rate(std::span<const double> z, int n) const {
    double d = 0.0;
    for (int k = 0; k < resources; ++k) d += z[at(n, k)] * rate[at(n, k)];
    return d;
  }
  double wifi_rate(std::span<const double> z, int n) const {
    double w = 0.0;
    for (int k = 1; k < resources; ++k) w += z[at(n, k)] * rate[at(n, k)];
    return w;
  }
  /// Value of user n at rate d. With smooth > 0 the slope drop at the
  /// saturation rate is spread linearly over sat * (1 -+ smooth).
  double user_value(int n, double d) const {
    const UserValue& v = value[static_cast<std::size_t>(n)];
    if (!(smooth > 0.0)) return v.value(d);
    const double sat = v.saturation_rate(), h = smooth * sat, lo = sat - h;
    if (!(h > 0.0) || d <= lo) return v.value(d);
    const double x = std::min(d, sat + h);
    return v.value(lo) + v.slope(lo) / (2.0 * h) * ((sat + h) * (x - lo) - 0.5 * (x * x - lo * lo));
  }
  double user_slope(int n, double d) const {
    const UserValue& v = value[static_cast<std::size_t>(n)];
    if (!(smooth > 0.0)) return v.slope(d);
    const double sat = v.saturation_rate(), h = smooth * sat, lo = sat - h;
    if (!(h > 0.0) || d <= lo) return v.slope(d);
    if (d >= sat + h) return 0.0;
    return v.slope(lo) * (sat + h - d) / (2.0 * h);
  }

  double penalty(std::span<const double> z) const {
    if (sigma == 0.0) return 0.0;
    double s = 0.0;
    for (int n = 0; n < users; ++n) {
      double w = wifi_rate(z, n);
      s += w * w;
    }
    return sigma * std::sqrt(s);
  }
  double objective(std::span<const double> z) const {
    double f = 0.0;
    for (int n = 0; n < users; ++n) f += user_value(n, user_rate(z, n));
    return f - penalty(z);
  }
  std::vector<double> gradient(std::span<const double> z) const {
    std::vector<double> g(size(), 0.0);
    double norm = 0.0;
    std::vector<double> w(static_cast<std::size_t>(users), 0.0);
    if (sigma > 0.0) {
      for (int n = 0; n < users; ++n) {
        w[static_cast<std::size_t>(n)] = wifi_rate(z, n);
        norm += w[static_cast<std::size_t>(n)] * w[static_cast<std::size_t>(n)];
      }
      norm = std::sqrt(norm);
    }
    for (int n = 0; n < users; ++n) {
      double s = user_slope(n, user_rate(z, n));
      for (int k = 0; k < resources; ++k) {
        double r = rate[at(n, k)];
        if (r == 0.0) continue;
        double gk = s * r;
        if (k > 0 && norm > 0.0) gk -= sigma * w[static_cast<std::size_t>(n)] * r / norm;
        g[at(n, k)] = gk;
      }
    }
    return g;
  }

  /// Largest coverage shortfall max_n (floor_n - d_n)^+.
  double coverage_gap(std::span<const double> z) const {
    double gap = 0.0;
    for (int n = 0; n < users; ++n) gap = std::max(gap, floor[static_cast<std::size_t>(n)] - user_rate(z, n));
    return gap;
  }

  /// Euclidean projection onto {0 <= z, sum_n z[.][k] <= 1} intersected with
  /// the coverage half-spaces (Dykstra). Ends on the capacity set, so
  /// capacities hold exactly and coverage to the iteration tolerance.
  std::vector<double> project(std::span<const double> x, double tol = 1e-13, int max_cycles = 20000) const {
    std::vector<double> y(x.begin(), x.end());
    for (std::size_t v = 0; v < y.size(); ++v)
      if (rate[v] == 0.0) y[v] = 0.0;
    std::vector<double> p(size(), 0.0), q(size(), 0.0), a(size()), b(size());
    for (int cycle = 0; cycle < max_cycles; ++cycle) {
      for (std::size_t v = 0; v < y.size(); ++v) a[v] = y[v] + p[v];
      std::vector<double> u = a;
      project_coverage(u);
      for (std::size_t v = 0; v < y.size(); ++v) {
        p[v] = a[v] - u[v];
        b[v] = u[v] + q[v];
      }
      std::vector<double> yn = b;
      project_capacity(yn);
      double change = 0.0;
      for (std::size_t v = 0; v < y.size(); ++v) {
        q[v] = b[v] - yn[v];
        change = std::max(change, std::abs(yn[v] - y[v]));
      }
      y = std::move(yn);
      if (change <= tol && coverage_gap(y) <= tol * 10.0) break;
    }
    return y;
  }

 private:
  void project_coverage(std::vector<double>& z) const {
    for (int n = 0; n < users; ++n) {
      double d = user_rate(z, n), nn = 0.0;
      for (int k = 0; k < resources; ++k) nn += rate[at(n, k)] * rate[at(n, k)];
      double short_by = floor[static_cast<std::size_t>(n)] - d;
      if (short_by <= 0.0 || nn == 0.0) continue;
      for (int k = 0; k < resources; ++k) z[at(n, k)] += short_by / nn * rate[at(n, k)];
    }
  }

  void project_capacity(std::vector<double>& z) const {
    std::vector<double> vals;
    for (int k = 0; k < resources; ++k) {
      vals.clear();
      double sum = 0.0;
      for (int n = 0; n < users; ++n) {
        std::size_t v = at(n, k);
        if (rate[v] == 0.0) {
          z[v] = 0.0;
          continue;
        }
        vals.push_back(z[v]);
        sum += std::max(z[v], 0.0);
      }
      if (sum <= 1.0) {
        for (int n = 0; n < users; ++n) z[at(n, k)] = std::max(z[at(n, k)], 0.0);
        continue;
      }
      // Simplex projection: z = max(x - tau, 0) with sum 1.
      std::sort(vals.begin(), vals.end(), std::greater<>());
      double cum = 0.0, tau = 0.0;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        cum += vals[i];
        double t = (cum - 1.0) / static_cast<double>(i + 1);
        if (i + 1 == vals.size() || vals[i + 1] <= t) {
          tau = t;
          break;
        }
      }
      for (int n = 0; n < users; ++n) {
        std::size_t v = at(n, k);
        if (rate[v] != 0.0) z[v] = std::max(z[v] - tau, 0.0);
      }
    }
  }
};

namespace detail {

inline int strongest_ap(const UserState& u) {
  int best = kNoAp;
  double r = 0.0;
  for (std::size_t i = 0; i < u.r_wifi.size(); ++i)
    if (u.r_wifi[i] > r) {
      r = u.r_wifi[i];
      best = static_cast<int>(i);
    }
  return best;
}

/// Minimum-share coverage of per-user rate demands (J * D_1 by default)
/// under a fixed association, minimizing total LTE share. Throws
/// InfeasibleError naming the binding constraint.
inline std::vector<double> minimum_coverage(const Instance& inst, std::span<const int> assoc,
                                            std::span<const double> demands = {}) {
  const int nres = inst.ap_count + 1;
  auto demand = [&](int n) { return demands.empty() ? inst.minimum_user_rate() : demands[static_cast<std::size_t>(n)]; };
  std::vector<double> z(static_cast<std::size_t>(inst.user_count() * nres), 0.0);
  auto at = [&](int n, int k) { return static_cast<std::size_t>(n * nres + k); };
  double lte = 0.0;

  auto ap_rate = [&](int n) {
    int i = assoc[static_cast<std::size_t>(n)];
    return i == kNoAp ? 0.0 : inst.users[static_cast<std::size_t>(n)].r_wifi.at(static_cast<std::size_t>(i));
  };

  for (int n = 0; n < inst.user_count(); ++n) {
    if (ap_rate(n) > 0.0) continue;
    double r = inst.users[static_cast<std::size_t>(n)].r_lte;
    if (!(r > 0.0))
      throw InfeasibleError(cat("minimum representations infeasible: user ", n, " has no rate under the association"));
    z[at(n, 0)] = demand(n) / r;
    lte += demand(n) / r;
  }
  for (int i = 0; i < inst.ap_count; ++i) {
    std::vector<int> on;
    for (int n = 0; n < inst.user_count(); ++n)
      if (assoc[static_cast<std::size_t>(n)] == i && ap_rate(n) > 0.0) on.push_back(n);
    double cap = 1.0;
    std::vector<int> flexible;
    for (int n : on) {
      if (inst.users[static_cast<std::size_t>(n)].r_lte > 0.0) {
        flexible.push_back(n);
        continue;
      }
      z[at(n, i + 1)] = demand(n) / ap_rate(n);
      cap -= z[at(n, i + 1)];
    }
    if (cap < -1e-12)
      throw InfeasibleError(cat("minimum representations infeasible: wifi_capacity at AP ", i, " (required share ",
                                1.0 - cap, " > 1)"));
    cap = std::max(cap, 0.0);
    std::stable_sort(flexible.begin(), flexible.end(), [&](int x, int y) {
      return ap_rate(x) / inst.users[static_cast<std::size_t>(x)].r_lte >
             ap_rate(y) / inst.users[static_cast<std::size_t>(y)].r_lte;
    });
    for (int n : flexible) {
      double need = demand(n) / ap_rate(n);
      double give = std::min(need, cap);
      cap -= give;
      z[at(n, i + 1)] = give;
      double rest = demand(n) - give * ap_rate(n);
      if (rest > 0.0) {
        double r = inst.users[static_cast<std::size_t>(n)].r_lte;
        z[at(n, 0)] = rest / r;
        lte += rest / r;
      }
    }
  }
  if (lte > 1.0 + 1e-12)
    throw InfeasibleError(cat("minimum representations infeasible: lte_capacity (required share ", lte, " > 1)"));
  return z;
}

/// Splits each resource's unused share equally among users with an active
/// variable on it.
inline void spread_leftover(const ConcaveProgram& prog, std::vector<double>& z) {
  for (int k = 0; k < prog.resources; ++k) {
    double used = 0.0;
    int count = 0;
    for (int n = 0; n < prog.users; ++n) {
      if (prog.rate[prog.at(n, k)] == 0.0) continue;
      used += z[prog.at(n, k)];
      ++count;
    }
    if (count == 0 || used >= 1.0) continue;
    double add = (1.0 - used) / count;
    for (int n = 0; n < prog.users; ++n)
      if (prog.rate[prog.at(n, k)] != 0.0) z[prog.at(n, k)] += add;
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct SpgResult {
  std::vector<double> z;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

/// Spectral projected gradient ascent from a feasible start.
inline SpgResult spg_stage(const ConcaveProgram& prog, std::vector<double> x, const SolverParams& params) {
  SpgResult out;
  double f = prog.objective(x);
  std::vector<double> g = prog.gradient(x);
  if (params.record_trace) out.trace.push_back(f);
  double gmax = 0.0;
  for (double v : g) gmax = std::max(gmax, std::abs(v));
  const double fresh = 1.0 / std::max(gmax, 1e-12);
  double step = fresh;
  int quiet = 0;
  // BB steps collapse at the kinks of the piecewise-linear value; a stall
  // only ends the run once a restart from a fresh step makes no progress.
  double f_restart = f;
  bool restarted = false;
  auto stalled = [&] {
    const double tol = params.objective_tolerance * 1e-3 * (1.0 + std::abs(f));
    if (restarted && f - f_restart <= tol) return true;
    restarted = true;
    f_restart = f;
    step = fresh;
    quiet = 0;
    return false;
  };
  std::vector<double> trial(x.size()), xn(x.size()), dir(x.size());

  for (int it = 1; it <= params.max_iterations; ++it) {
    out.iterations = it;
    for (std::size_t v = 0; v < x.size(); ++v) trial[v] = x[v] + step * g[v];
    std::vector<double> y = prog.project(trial);
    double dmax = 0.0;
    for (std::size_t v = 0; v < x.size(); ++v) {
      dir[v] = y[v] - x[v];
      dmax = std::max(dmax, std::abs(dir[v]));
    }
    double gd = dot(g, dir);
    if (dmax <= 1e-12 || gd <= 0.0) {
      if (step == fresh || stalled()) {
        out.converged = true;
        break;
      }
      continue;
    }
    double alpha = 1.0, fn = f;
    bool accepted = false;
    while (alpha >= 1e-12) {
      for (std::size_t v = 0; v < x.size(); ++v) xn[v] = x[v] + alpha * dir[v];
      fn = prog.objective(xn);
      if (fn >= f + params.armijo * alpha * gd) {
        accepted = true;
        break;
      }
      alpha *= params.backtrack;
    }
    if (!accepted) {
      if (stalled()) {
        out.converged = true;  // no ascent left at working precision
        break;
      }
      continue;
    }
    std::vector<double> gn = prog.gradient(xn);
    double ss = 0.0, sy = 0.0;
    for (std::size_t v = 0; v < x.size(); ++v) {
      double s = xn[v] - x[v];
      ss += s * s;
      sy -= s * (gn[v] - g[v]);
    }
    step = sy > 1e-300 ? std::clamp(ss / sy, 1e-10, 1e10) : 1e10;
    double gain = fn - f;
    x.swap(xn);
    g = std::move(gn);
    f = fn;
    if (params.record_trace) out.trace.push_back(f);
    if (gain <= params.objective_tolerance * 1e-3 * (1.0 + std::abs(f))) {
      if (++quiet >= 3 && stalled()) {
        out.converged = true;
        break;
      }
    } else {
      quiet = 0;
    }
  }
  out.z = std::move(x);
  out.objective = f;
  return out;
}

/// Users tend to settle exactly at their saturation rate, where the slope
/// drops to zero and projected gradient steps stall. Solve a sequence of
/// programs with that kink rounded off, then polish on the exact one.
inline SpgResult spg(const ConcaveProgram& prog, std::vector<double> x, const SolverParams& params) {
  const double f0 = prog.objective(x);
  std::vector<double> start = x;
  ConcaveProgram rounded = prog;
  int iterations = 0;
  for (double w : {1e-2, 1e-3, 1e-4, 1e-5}) {
    rounded.smooth = w;
    SolverParams quiet = params;
    quiet.record_trace = false;
    SpgResult r = spg_stage(rounded, std::move(x), quiet);
    iterations += r.iterations;
    x = std::move(r.z);
  }
  if (prog.objective(x) < f0) x = std::move(start);
  SpgResult out = spg_stage(prog, std::move(x), params);
  out.iterations += iterations;
  return out;
}

inline ConcaveProgram make_program(const Instance& inst, std::span<const int> assoc_or_empty, bool opt3,
                                   const SolverParams& params, double sigma) {
  ConcaveProgram prog;
  prog.users = inst.user_count();
  prog.resources = inst.ap_count + 1;
  prog.sigma = sigma;
  prog.rate.assign(static_cast<std::size_t>(prog.users * prog.resources), 0.0);
  for (int n = 0; n < prog.users; ++n) {
    const auto& u = inst.users[static_cast<std::size_t>(n)];
    prog.rate[prog.at(n, 0)] = u.r_lte;
    for (int i = 0; i < inst.ap_count; ++i) {
      bool allowed = assoc_or_empty.empty() || assoc_or_empty[static_cast<std::size_t>(n)] == i;
      if (allowed) prog.rate[prog.at(n, i + 1)] = u.r_wifi.at(static_cast<std::size_t>(i));
    }
    prog.floor.push_back(inst.minimum_user_rate());
    prog.value.push_back(opt3 ? UserValue::opt3(inst, n, params.opt3_utility) : UserValue::exact(inst, n));
  }
  return prog;
}

inline SolverSolution finish(const Instance& inst, const ConcaveProgram& prog, SpgResult res,
                             std::span<const int> assoc_or_empty) {
  SolverSolution sol;
  sol.shares = res.z;
  sol.objective = res.objective;
  sol.penalty = prog.penalty(res.z);
  sol.iterations = res.iterations;
  sol.converged = res.converged;
  sol.trace = std::move(res.trace);
  for (int n = 0; n < prog.users; ++n) {
    UserAllocation ua;
    ua.d_lte = res.z[prog.at(n, 0)] * prog.rate[prog.at(n, 0)];
    ua.d_wifi.assign(static_cast<std::size_t>(inst.ap_count), 0.0);
    double best = 0.0;
    for (int i = 0; i < inst.ap_count; ++i) {
      double d = res.z[prog.at(n, i + 1)] * prog.rate[prog.at(n, i + 1)];
      ua.d_wifi[static_cast<std::size_t>(i)] = d;
      if (d > best) {
        best = d;
        ua.ap = i;
      }
    }
    if (!assoc_or_empty.empty()) ua.ap = assoc_or_empty[static_cast<std::size_t>(n)];
    ua.tile_rates = relaxed_tile_rates(inst, n, ua.transmission_rate());
    sol.allocation.users.push_back(std::move(ua));
  }
  return sol;
}

/// Feasible start for problems without a fixed association.
inline std::vector<double> free_start(const Instance& inst, const ConcaveProgram& prog, double feas_tol) {
  std::vector<int> assoc;
  for (const auto& u : inst.users) assoc.push_back(strongest_ap(u));
  try {
    std::vector<double> z = minimum_coverage(inst, assoc);
    spread_leftover(prog, z);
    return z;
  } catch (const InfeasibleError&) {
  }
  std::vector<double> z(prog.size(), 0.0);
  spread_leftover(prog, z);
  z = prog.project(z, 1e-15, 200000);
  if (prog.coverage_gap(z) > feas_tol * std::max(1.0, inst.minimum_user_rate()))
    throw InfeasibleError(cat("minimum representations infeasible: wifi_capacity/lte_capacity cannot cover ",
                              inst.minimum_user_rate(), " Mbps per user (gap ", prog.coverage_gap(z), ")"));
  return z;
}

inline std::vector<double> apply_warm_start(const ConcaveProgram& prog, const SolverParams& params,
                                            std::vector<double> fallback, double feas_tol) {
  if (!params.warm_start || params.warm_start->size() != prog.size()) return fallback;
  std::vector<double> z = prog.project(*params.warm_start);
  if (prog.coverage_gap(z) > feas_tol) return fallback;
  if (prog.objective(z) < prog.objective(fallback)) return fallback;
  return z;
}

}  // namespace detail

/// Relaxed joint program for a fixed association (kNoAp allowed for LTE-only users).
/// The penalty coefficient is not used here.
inline SolverSolution solve_fixed_assoc(const Instance& inst, std::span<const int> assoc, const SolverParams& params = {}) {
  if (static_cast<int>(assoc.size()) != inst.user_count()) throw DomainError("association size differs from user count");
  for (int a : assoc)
    if (a != kNoAp && (a < 0 || a >= inst.ap_count)) throw DomainError(detail::cat("association names unknown AP ", a));
  if (inst.user_count() == 0) return {};
  ConcaveProgram prog = detail::make_program(inst, assoc, false, params, 0.0);
  std::vector<double> z = detail::minimum_coverage(inst, assoc);
  detail::spread_leftover(prog, z);
  z = detail::apply_warm_start(prog, params, std::move(z), params.feasibility_tolerance);
  return detail::finish(inst, prog, detail::spg(prog, std::move(z), params), assoc);
}

/// Penalized relaxation with free multi-AP Wi-Fi rates.
inline SolverSolution solve_opt2(const Instance& inst, const SolverParams& params = {}) {
  if (!(params.sigma >= 0.0)) throw DomainError("penalty coefficient must be non-negative");
  if (inst.user_count() == 0) return {};
  ConcaveProgram prog = detail::make_program(inst, {}, false, params, params.sigma);
  std::vector<double> z = detail::free_start(inst, prog, params.feasibility_tolerance);
  z = detail::apply_warm_start(prog, params, std::move(z), params.feasibility_tolerance);
  return detail::finish(inst, prog, detail::spg(prog, std::move(z), params), {});
}

/// User-rate relaxation with the penalty; the allocation's tile rates are the
/// exact relaxed split of each user's rate.
inline SolverSolution solve_opt3_relaxed(const Instance& inst, const SolverParams& params = {}) {
  if (!(params.sigma >= 0.0)) throw DomainError("penalty coefficient must be non-negative");
  if (inst.user_count() == 0) return {};
  ConcaveProgram prog = detail::make_program(inst, {}, true, params, params.sigma);
  std::vector<double> z = detail::free_start(inst, prog, params.feasibility_tolerance);
  z = detail::apply_warm_start(prog, params, std::move(z), params.feasibility_tolerance);
  return detail::finish(inst, prog, detail::spg(prog, std::move(z), params), {});
}

/// User-rate relaxation for a fixed association.
inline SolverSolution solve_opt3_fixed(const Instance& inst, std::span<const int> assoc, const SolverParams& params = {}) {
  if (inst.user_count() == 0) return {};
  ConcaveProgram prog = detail::make_program(inst, assoc, true, params, 0.0);
  std::vector<double> z = detail::minimum_coverage(inst, assoc);
  detail::spread_leftover(prog, z);
  z = detail::apply_warm_start(prog, params, std::move(z), params.feasibility_tolerance);
  return detail::finish(inst, prog, detail::spg(prog, std::move(z), params), assoc);
}

// ---------------------------------------------------------------------------
// Association repair

inline constexpr int kUnplaced = -2;

/// Users whose second-largest relaxed Wi-Fi rate exceeds `threshold`; every
/// other user takes its largest-rate AP (or its strongest AP when it carries
/// no Wi-Fi). Ambiguous users are marked kUnplaced in the returned vector.
inline std::vector<int> threshold_association(const Instance& inst, const Allocation& relaxed, double threshold) {
  std::vector<int> assoc;
  for (int n = 0; n < inst.user_count(); ++n) {
    const auto& w = relaxed.users[static_cast<std::size_t>(n)].d_wifi;
    std::vector<double> sorted(w);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    if (sorted.size() >= 2 && sorted[1] > threshold) {
      assoc.push_back(kUnplaced);
      continue;
    }
    int best = kNoAp;
    double r = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (w[i] > r) {
        r = w[i];
        best = static_cast<int>(i);
      }
    assoc.push_back(best == kNoAp ? detail::strongest_ap(inst.users[static_cast<std::size_t>(n)]) : best);
  }
  return assoc;
}

/// Greedy placement: repeatedly admits the (user, AP) pair whose sub-instance
/// (placed users plus the candidate) has the best relaxed objective. Users
/// already placed in `assoc` stay fixed; kUnplaced entries are filled.
/// `solve` maps (sub-instance, sub-association) to a relaxed objective and
/// throws InfeasibleError for infeasible candidates.
template <typename Solve>
std::vector<int> greedy_placement(const Instance& inst, std::vector<int> assoc, Solve&& solve) {
  std::vector<int> placed;
  std::vector<int> pending;
  for (int n = 0; n < inst.user_count(); ++n)
    (assoc[static_cast<std::size_t>(n)] == kUnplaced ? pending : placed).push_back(n);
  const int options = std::max(inst.ap_count, 1);

  while (!pending.empty()) {
    double best = -std::numeric_limits<double>::infinity();
    int best_user = -1, best_ap = kNoAp;
    for (int n : pending) {
      for (int o = 0; o < options; ++o) {
        int ap = inst.ap_count == 0 ? kNoAp : o;
        std::vector<int> keep = placed;
        keep.push_back(n);
        std::sort(keep.begin(), keep.end());
        std::vector<int> sub_assoc;
        for (int m : keep) sub_assoc.push_back(m == n ? ap : assoc[static_cast<std::size_t>(m)]);
        double value;
        try {
          value = solve(inst.subset(keep), std::span<const int>(sub_assoc));
        } catch (const InfeasibleError&) {
          continue;
        }
        if (value > best) {
          best = value;
          best_user = n;
          best_ap = ap;
        }
      }
    }
    if (best_user < 0)
      throw InfeasibleError("minimum representations infeasible: no placement covers the remaining users");
    assoc[static_cast<std::size_t>(best_user)] = best_ap;
    placed.push_back(best_user);
    pending.erase(std::find(pending.begin(), pending.end(), best_user));
  }
  return assoc;
}

/// User-rate relaxation with single-AP association: penalized solve,
/// thresholding, greedy repair of ambiguous users, then a fixed-association
/// solve. Returns per-user rates and the association in the allocation.
inline SolverSolution solve_opt3(const Instance& inst, const SolverParams& params = {}, double threshold = 0.05) {
  if (inst.user_count() == 0) return {};
  SolverSolution relaxed = solve_opt3_relaxed(inst, params);
  std::vector<int> assoc = threshold_association(inst, relaxed.allocation, threshold);
  SolverParams cold = params;
  cold.warm_start.reset();
  cold.record_trace = false;
  assoc = greedy_placement(inst, std::move(assoc), [&](const Instance& sub, std::span<const int> a) {
    return solve_opt3_fixed(sub, a, cold).objective;
  });
  return solve_opt3_fixed(inst, assoc, cold);
}

/// Objective of the user-rate relaxation evaluated at given per-user rates.
inline double opt3_objective(const Instance& inst, std::span<const double> user_rates, Opt3Utility form) {
  double f = 0.0;
  for (int n = 0; n < inst.user_count(); ++n)
    f += UserValue::opt3(inst, n, form).value(user_rates[static_cast<std::size_t>(n)]);
  return f;
}

}  // namespace tilevr
