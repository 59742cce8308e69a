#pragma once

// Shared domain types for tile-based 360-degree video allocation: the
// representation ladder, the equirectangular tile grid, user/network state,
// problem instances and allocations, plus instance validation and the
// constraint checker every allocation strategy is held to.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tilevr {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The minimum-representation guarantee cannot be met with the available rates.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Representation ladder

struct RepresentationLadder {
  std::vector<double> rates;  // Mbps, strictly increasing

  int size() const { return static_cast<int>(rates.size()); }
  double min() const { return rates.front(); }
  double max() const { return rates.back(); }
  /// 1-based level lookup.
  double rate(int level) const { return rates.at(static_cast<std::size_t>(level - 1)); }

  static RepresentationLadder default_ladder() {
    RepresentationLadder l;
    for (int i = 1; i <= 10; ++i) l.rates.push_back(0.1 * i);
    return l;
  }
};

/// Largest level m with D_m <= rate, or nullopt when rate < D_1.
inline std::optional<int> quantize_down(double rate, const RepresentationLadder& ladder) {
  // Tolerate representation error so that 0.1*3 quantizes to the 0.3 level.
  constexpr double kSlack = 1e-12;
  auto it = std::upper_bound(ladder.rates.begin(), ladder.rates.end(), rate + kSlack);
  if (it == ladder.rates.begin()) return std::nullopt;
  return static_cast<int>(it - ladder.rates.begin());
}

// ---------------------------------------------------------------------------
// Tile grid over the equirectangular frame. Row 0 is the northmost band,
// column 0 starts at yaw -180.

struct TileGrid {
  int rows = 4;
  int cols = 8;

  int tile_count() const { return rows * cols; }
  int index(int row, int col) const { return row * cols + col; }
  int row_of(int tile) const { return tile / cols; }
  int col_of(int tile) const { return tile % cols; }

  double tile_width() const { return 360.0 / cols; }
  double tile_height() const { return 180.0 / rows; }

  /// [low, high) yaw bounds of a column, degrees.
  std::pair<double, double> yaw_bounds(int col) const {
    double lo = -180.0 + col * tile_width();
    return {lo, lo + tile_width()};
  }
  /// [low, high) pitch bounds of a row, degrees (low is further south).
  std::pair<double, double> pitch_bounds(int row) const {
    double hi = 90.0 - row * tile_height();
    return {hi - tile_height(), hi};
  }
};

/// Per-tile saliency weights of one video segment, row-major over the grid.
using SaliencyMap = std::vector<double>;

struct QoeParams {
  double a = 1.0;
  /// When unset, B = e * D_M / D_1 so that U(D_1) = A.
  std::optional<double> b;
  double mu = 1.0;

  double b_for(const RepresentationLadder& ladder) const {
    return b ? *b : std::exp(1.0) * ladder.max() / ladder.min();
  }
};

// ---------------------------------------------------------------------------
// View geometry and probable FoVs

struct ViewDirection {
  double yaw = 0.0;    // degrees, wraps modulo 360
  double pitch = 0.0;  // degrees, [-90, 90]
};

struct FovExtent {
  double horizontal = 120.0;
  double vertical = 90.0;
};

struct FovPrediction {
  ViewDirection center;
  double accuracy = 1.0;  // gamma in [0, 1]
};

struct ProbableFov {
  std::vector<int> tiles;  // sorted, unique
  double probability = 0.0;

  bool operator==(const ProbableFov&) const = default;
};

/// Probable FoVs sorted by descending probability, truncated at the
/// guarantee probability. Probabilities are not renormalized.
struct ProbableFovSet {
  std::vector<ProbableFov> entries;
  double guarantee = 0.95;

  double total_probability() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.probability;
    return s;
  }
  /// Single FoV of every tile with probability one (no usable prediction).
  static ProbableFovSet whole_frame(int tile_count) {
    ProbableFovSet s;
    ProbableFov f;
    f.tiles.resize(static_cast<std::size_t>(tile_count));
    std::iota(f.tiles.begin(), f.tiles.end(), 0);
    f.probability = 1.0;
    s.entries.push_back(std::move(f));
    s.guarantee = 1.0;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Users, instances, allocations

struct UserState {
  int id = 0;
  int video = 0;
  double r_lte = 0.0;            // achievable LTE rate, Mbps
  std::vector<double> r_wifi;    // achievable rate per AP, Mbps
  std::optional<FovPrediction> prediction;
};

/// One decision epoch.
struct Instance {
  std::vector<UserState> users;
  int ap_count = 0;
  TileGrid grid;
  RepresentationLadder ladder = RepresentationLadder::default_ladder();
  std::vector<SaliencyMap> saliency;  // indexed by video id
  std::vector<ProbableFovSet> fovs;   // indexed like users
  QoeParams qoe;

  int user_count() const { return static_cast<int>(users.size()); }
  int tile_count() const { return grid.tile_count(); }
  /// Rate needed to carry every tile at the lowest representation.
  double minimum_user_rate() const { return tile_count() * ladder.min(); }

  const SaliencyMap& weights_of(int user) const {
    return saliency.at(static_cast<std::size_t>(users.at(static_cast<std::size_t>(user)).video));
  }

  /// Sub-instance holding the given users in the given order.
  Instance subset(std::span<const int> keep) const {
    Instance out = *this;
    out.users.clear();
    out.fovs.clear();
    for (int n : keep) {
      out.users.push_back(users.at(static_cast<std::size_t>(n)));
      out.fovs.push_back(fovs.at(static_cast<std::size_t>(n)));
    }
    return out;
  }
};

inline constexpr int kNoAp = -1;

struct UserAllocation {
  int ap = kNoAp;
  double d_lte = 0.0;
  std::vector<double> d_wifi;      // one entry per AP
  std::vector<double> tile_rates;  // D_{n,j}
  std::vector<int> levels;         // 1-based ladder levels; empty while fractional

  double wifi_total() const { return std::accumulate(d_wifi.begin(), d_wifi.end(), 0.0); }
  double transmission_rate() const { return d_lte + wifi_total(); }
  double tile_rate_sum() const { return std::accumulate(tile_rates.begin(), tile_rates.end(), 0.0); }
  bool discrete() const { return !levels.empty(); }

  bool operator==(const UserAllocation&) const = default;
};

struct Allocation {
  std::vector<UserAllocation> users;

  std::vector<int> association() const {
    std::vector<int> a;
    a.reserve(users.size());
    for (const auto& u : users) a.push_back(u.ap);
    return a;
  }
  bool operator==(const Allocation&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

template <typename... Ts>
std::string cat(const Ts&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

}  // namespace detail

/// Every violated invariant of the instance; empty when well formed.
inline std::vector<std::string> validate_instance(const Instance& inst) {
  using detail::cat;
  std::vector<std::string> out;
  const auto& rates = inst.ladder.rates;

  if (rates.size() < 2) out.push_back("ladder needs at least 2 representations");
  if (std::any_of(rates.begin(), rates.end(), [](double r) { return !(r > 0.0); }))
    out.push_back("ladder rates must be positive");
  for (std::size_t m = 1; m < rates.size(); ++m) {
    if (!(rates[m] > rates[m - 1])) {
      out.push_back("ladder not increasing");
      break;
    }
  }
  if (inst.grid.rows <= 0 || inst.grid.cols <= 0) out.push_back("grid dimensions must be positive");
  if (inst.ap_count < 0) out.push_back("AP count must be non-negative");

  const int tiles = std::max(0, inst.grid.rows) * std::max(0, inst.grid.cols);
  for (std::size_t v = 0; v < inst.saliency.size(); ++v) {
    const auto& w = inst.saliency[v];
    if (static_cast<int>(w.size()) != tiles) {
      out.push_back(cat("video ", v, ": saliency has ", w.size(), " weights, expected ", tiles));
      continue;
    }
    if (std::any_of(w.begin(), w.end(), [](double x) { return !(x >= 0.0); }))
      out.push_back(cat("video ", v, ": negative saliency weight"));
    double sum = std::accumulate(w.begin(), w.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) out.push_back(cat("video ", v, ": weights not normalized (sum ", sum, ")"));
  }

  if (!(inst.qoe.a > 0.0)) out.push_back("qoe: A must be positive");
  if (!(inst.qoe.mu >= 0.0)) out.push_back("qoe: mu must be non-negative");
  if (rates.size() >= 2 && rates.front() > 0.0) {
    double b = inst.qoe.b_for(inst.ladder);
    if (!(b * rates.front() / rates.back() >= 1.0 - 1e-12))
      out.push_back("qoe: B*D_1/D_M < 1 gives negative utility");
  }

  if (inst.fovs.size() != inst.users.size())
    out.push_back(cat("expected ", inst.users.size(), " probable-FoV sets, got ", inst.fovs.size()));

  for (std::size_t n = 0; n < inst.users.size(); ++n) {
    const auto& u = inst.users[n];
    if (u.video < 0 || static_cast<std::size_t>(u.video) >= inst.saliency.size())
      out.push_back(cat("user ", n, ": unknown video ", u.video));
    if (!(u.r_lte >= 0.0)) out.push_back(cat("user ", n, ": negative LTE rate"));
    if (static_cast<int>(u.r_wifi.size()) != inst.ap_count)
      out.push_back(cat("user ", n, ": ", u.r_wifi.size(), " Wi-Fi rates, expected ", inst.ap_count));
    if (std::any_of(u.r_wifi.begin(), u.r_wifi.end(), [](double r) { return !(r >= 0.0); }))
      out.push_back(cat("user ", n, ": negative Wi-Fi rate"));
    double best_wifi = u.r_wifi.empty() ? 0.0 : *std::max_element(u.r_wifi.begin(), u.r_wifi.end());
    if (!(u.r_lte > 0.0) && !(best_wifi > 0.0))
      out.push_back(cat("user ", n, ": no network offers positive rate"));
    else if (rates.size() >= 2 && u.r_lte + best_wifi < tiles * rates.front() - 1e-12)
      out.push_back(cat("user ", n, ": minimum representations infeasible (best rate ", u.r_lte + best_wifi,
                        " < ", tiles * rates.front(), ")"));
    if (u.prediction && !(u.prediction->accuracy >= 0.0 && u.prediction->accuracy <= 1.0))
      out.push_back(cat("user ", n, ": prediction accuracy outside [0,1]"));

    if (n < inst.fovs.size()) {
      const auto& set = inst.fovs[n];
      for (const auto& f : set.entries) {
        if (f.tiles.empty()) out.push_back(cat("user ", n, ": empty FoV tile set"));
        if (std::any_of(f.tiles.begin(), f.tiles.end(), [&](int j) { return j < 0 || j >= tiles; }))
          out.push_back(cat("user ", n, ": FoV tile index out of range"));
        if (!(f.probability > 0.0)) out.push_back(cat("user ", n, ": FoV probability must be positive"));
      }
      if (set.total_probability() > 1.0 + 1e-9) out.push_back(cat("user ", n, ": FoV probabilities exceed 1"));
    }
  }

  // Aggregate share demand: each user needs at least J*D_1 / (best rate) of
  // some resource, and only I + 1 resources exist.
  if (rates.size() >= 2 && rates.front() > 0.0 && !inst.users.empty()) {
    double demand = 0.0;
    for (const auto& u : inst.users) {
      double best = u.r_lte;
      for (double r : u.r_wifi) best = std::max(best, r);
      if (best > 0.0) demand += tiles * rates.front() / best;
    }
    if (demand > inst.ap_count + 1 + 1e-9)
      out.push_back(cat("minimum representations infeasible: aggregate share demand ", demand, " exceeds ",
                        inst.ap_count + 1, " resources"));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Constraint checking

enum class CheckMode { discrete, relaxed };

struct ConstraintViolation {
  std::string constraint;  // tile_budget, lte_capacity, wifi_capacity, single_ap, ...
  int user = -1;
  int ap = -1;
  double slack = 0.0;  // amount by which the constraint is exceeded
};

/// Evaluates the budget, capacity, association and ladder constraints with
/// absolute tolerance `tol`. Relaxed mode admits fractional tile rates in
/// [D_1, D_M] and multi-AP Wi-Fi rates.
inline std::vector<ConstraintViolation> check_allocation(const Allocation& alloc, const Instance& inst, double tol,
                                                         CheckMode mode = CheckMode::discrete) {
  std::vector<ConstraintViolation> out;
  auto add = [&](std::string c, int n, int i, double slack) { out.push_back({std::move(c), n, i, slack}); };

  const int tiles = inst.tile_count();
  if (alloc.users.size() != inst.users.size()) {
    add("dimension", -1, -1, std::abs(double(alloc.users.size()) - double(inst.users.size())));
    return out;
  }

  double lte_share = 0.0;
  std::vector<double> ap_share(static_cast<std::size_t>(inst.ap_count), 0.0);
  const double d1 = inst.ladder.min();
  const double dm = inst.ladder.max();

  for (int n = 0; n < inst.user_count(); ++n) {
    const auto& ua = alloc.users[static_cast<std::size_t>(n)];
    const auto& us = inst.users[static_cast<std::size_t>(n)];
    if (static_cast<int>(ua.tile_rates.size()) != tiles || static_cast<int>(ua.d_wifi.size()) != inst.ap_count) {
      add("dimension", n, -1, 1.0);
      continue;
    }

    if (ua.d_lte < -tol) add("nonnegative_rate", n, -1, -ua.d_lte);
    for (int i = 0; i < inst.ap_count; ++i)
      if (ua.d_wifi[static_cast<std::size_t>(i)] < -tol) add("nonnegative_rate", n, i, -ua.d_wifi[static_cast<std::size_t>(i)]);

    double over = ua.tile_rate_sum() - ua.transmission_rate();
    if (over > tol) add("tile_budget", n, -1, over);

    if (ua.d_lte > tol) {
      if (us.r_lte > 0.0)
        lte_share += ua.d_lte / us.r_lte;
      else
        add("lte_capacity", n, -1, ua.d_lte);
    }
    int carrying = 0;
    for (int i = 0; i < inst.ap_count; ++i) {
      double d = ua.d_wifi[static_cast<std::size_t>(i)];
      if (d > tol) {
        ++carrying;
        double r = us.r_wifi[static_cast<std::size_t>(i)];
        if (r > 0.0)
          ap_share[static_cast<std::size_t>(i)] += d / r;
        else
          add("wifi_capacity", n, i, d);
        if (mode == CheckMode::discrete && ua.ap != i) add("single_ap", n, i, d);
      }
    }
    if (mode == CheckMode::discrete && carrying > 1) add("single_ap", n, -1, double(carrying - 1));

    for (int j = 0; j < tiles; ++j) {
      double dj = ua.tile_rates[static_cast<std::size_t>(j)];
      if (dj < d1 - tol) add("minimum_representation", n, -1, d1 - dj);
      if (dj > dm + tol) add("maximum_representation", n, -1, dj - dm);
    }

    if (mode == CheckMode::discrete) {
      if (static_cast<int>(ua.levels.size()) != tiles) {
        add("ladder_membership", n, -1, 1.0);
      } else {
        for (int j = 0; j < tiles; ++j) {
          int m = ua.levels[static_cast<std::size_t>(j)];
          if (m < 1 || m > inst.ladder.size()) {
            add("ladder_membership", n, -1, 1.0);
            continue;
          }
          double diff = std::abs(inst.ladder.rate(m) - ua.tile_rates[static_cast<std::size_t>(j)]);
          if (diff > tol) add("ladder_membership", n, -1, diff);
        }
      }
    }
  }
  if (lte_share > 1.0 + tol) add("lte_capacity", -1, -1, lte_share - 1.0);
  for (int i = 0; i < inst.ap_count; ++i)
    if (ap_share[static_cast<std::size_t>(i)] > 1.0 + tol) add("wifi_capacity", -1, i, ap_share[static_cast<std::size_t>(i)] - 1.0);
  return out;
}

}  // namespace tilevr
