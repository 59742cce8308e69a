#pragma once

// Trace-driven sessions: per epoch a network snapshot becomes an Instance,
// the allocation strategy sets each user's rate, the buffer policy spends it
// and playback is scored against the ground-truth view.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "tilevr/allocation.hpp"
#include "tilevr/buffer.hpp"
#include "tilevr/core.hpp"
#include "tilevr/fov.hpp"
#include "tilevr/qoe.hpp"
#include "tilevr/random.hpp"

namespace tilevr {

// ---------------------------------------------------------------------------
// Traces

struct NetworkSnapshot {
  std::vector<double> r_lte;                // per user
  std::vector<std::vector<double>> r_wifi;  // per user, per AP

  bool operator==(const NetworkSnapshot&) const = default;
};

struct NetworkTrace {
  double epoch = 0.5;  // s between snapshots
  int users = 0;
  int aps = 0;
  std::vector<NetworkSnapshot> snapshots;

  double duration() const { return epoch * static_cast<double>(snapshots.size()); }
  bool operator==(const NetworkTrace&) const = default;

  std::vector<std::string> validate() const {
    std::vector<std::string> out;
    if (!(epoch > 0.0)) out.push_back("network trace epoch must be positive");
    for (std::size_t e = 0; e < snapshots.size(); ++e) {
      const auto& s = snapshots[e];
      if (static_cast<int>(s.r_lte.size()) != users || static_cast<int>(s.r_wifi.size()) != users) {
        out.push_back(detail::cat("snapshot ", e, " does not cover ", users, " users"));
        continue;
      }
      for (int n = 0; n < users; ++n) {
        auto N = static_cast<std::size_t>(n);
        if (!(s.r_lte[N] >= 0.0)) out.push_back(detail::cat("snapshot ", e, " user ", n, ": negative LTE rate"));
        if (static_cast<int>(s.r_wifi[N].size()) != aps)
          out.push_back(detail::cat("snapshot ", e, " user ", n, ": expected ", aps, " Wi-Fi rates"));
        for (double r : s.r_wifi[N])
          if (!(r >= 0.0)) out.push_back(detail::cat("snapshot ", e, " user ", n, ": negative Wi-Fi rate"));
      }
    }
    return out;
  }

  NetworkTrace scaled(double factor) const {
    NetworkTrace out = *this;
    for (auto& s : out.snapshots) {
      for (auto& r : s.r_lte) r *= factor;
      for (auto& row : s.r_wifi)
        for (auto& r : row) r *= factor;
    }
    return out;
  }

  /// First `count` users of every snapshot.
  NetworkTrace first_users(int count) const {
    NetworkTrace out = *this;
    out.users = std::min(count, users);
    for (auto& s : out.snapshots) {
      s.r_lte.resize(static_cast<std::size_t>(out.users));
      s.r_wifi.resize(static_cast<std::size_t>(out.users));
    }
    return out;
  }
};

struct GopPrediction {
  ViewDirection center;
  double accuracy = 1.0;

  bool operator==(const GopPrediction&) const = default;
};

/// Ground-truth view per frame and the predictions the server sees. Without
/// explicit per-GoP predictions, a prediction made `lookahead` seconds ahead
/// is the true mid-GoP view displaced by a seeded error growing with the
/// lookahead, with accuracy falling linearly from `accuracy_near` to
/// `accuracy_far` at the prediction horizon.
struct FovTrace {
  double fps = 30.0;
  int gop = 15;
  std::vector<std::vector<ViewDirection>> truth;         // [user][frame]
  std::vector<std::vector<GopPrediction>> predictions;   // [user][gop], optional
  double error_deg_per_s = 15.0;
  double accuracy_near = 0.95;
  double accuracy_far = 0.6;
  double horizon = 2.0;
  std::uint64_t seed = 0;

  int users() const { return static_cast<int>(truth.size()); }
  long frames() const { return truth.empty() ? 0 : static_cast<long>(truth.front().size()); }
  double duration() const { return static_cast<double>(frames()) / fps; }

  const ViewDirection& view(int user, long frame) const {
    const auto& t = truth.at(static_cast<std::size_t>(user));
    return t.at(static_cast<std::size_t>(std::clamp<long>(frame, 0, static_cast<long>(t.size()) - 1)));
  }

  FovPrediction predict(int user, long gop_index, double lookahead) const {
    if (!predictions.empty()) {
      const auto& p = predictions.at(static_cast<std::size_t>(user));
      const auto& g = p.at(static_cast<std::size_t>(std::clamp<long>(gop_index, 0, static_cast<long>(p.size()) - 1)));
      return {g.center, g.accuracy};
    }
    const double ahead = std::max(0.0, lookahead);
    const ViewDirection mid = view(user, gop_index * gop + gop / 2);
    // One error direction per (user, segment) so repeated calls agree.
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(user + 1)) ^
            (0xc2b2ae3d27d4eb4fULL * static_cast<std::uint64_t>(gop_index + 1)));
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double size = error_deg_per_s * ahead * rng.uniform(0.5, 1.0);
    FovPrediction out;
    out.center.yaw = detail::wrap_yaw(mid.yaw + size * std::cos(angle));
    out.center.pitch = std::clamp(mid.pitch + size * std::sin(angle), -90.0, 90.0);
    const double frac = horizon > 0.0 ? std::min(1.0, ahead / horizon) : 1.0;
    out.accuracy = std::clamp(accuracy_near - (accuracy_near - accuracy_far) * frac, 1e-3, 1.0);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Synthesis

/// Log-distance path loss mapped to a capped Shannon rate.
struct LinkModel {
  double bandwidth_mhz = 20.0;
  double snr_at_1m_db = 55.0;
  double exponent = 3.5;
  double efficiency = 0.5;
  double cap = 30.0;  // Mbps

  double rate(double distance_m, double scale = 1.0) const {
    double snr_db = snr_at_1m_db - 10.0 * exponent * std::log10(std::max(distance_m, 1.0));
    double raw = efficiency * bandwidth_mhz * std::log2(1.0 + std::pow(10.0, snr_db / 10.0));
    return scale * std::min(cap, raw);
  }
};

struct SynthSpec {
  int users = 5;
  int aps = 5;
  int videos = 4;
  double radius = 200.0;      // m, LTE coverage
  double ap_ring = 60.0;      // m, APs sit on a ring around the base station
  double user_spread = 40.0;  // m around the chosen AP
  bool congestion = false;
  int congestion_from = 6;    // 1-based; users from here on crowd AP 1
  double congestion_spread = 15.0;
  double bandwidth_scale = 1.0;
  LinkModel lte{10.0, 60.0, 3.0, 0.5, 30.0};
  LinkModel wifi{};
  // Prediction accuracy range of the epoch snapshot.
  double accuracy_low = 0.6;
  double accuracy_high = 1.0;
  FovExtent extent;
  double guarantee = 0.95;
};

namespace detail {

inline std::pair<double, double> ap_position(int i, const SynthSpec& spec) {
  double angle = 2.0 * std::numbers::pi * i / std::max(1, spec.aps);
  return {spec.ap_ring * std::cos(angle), spec.ap_ring * std::sin(angle)};
}

/// Smooth saliency: a few Gaussian blobs over the frame, normalized.
inline SaliencyMap synth_saliency(const TileGrid& grid, Rng& rng) {
  SaliencyMap w(static_cast<std::size_t>(grid.tile_count()), 0.0);
  const int blobs = rng.integer(1, 3);
  for (int b = 0; b < blobs; ++b) {
    ViewDirection c{rng.uniform(-180.0, 180.0), rng.uniform(-45.0, 45.0)};
    double width = rng.uniform(15.0, 40.0);
    double height = rng.uniform(0.5, 1.0);
    for (int j = 0; j < grid.tile_count(); ++j) {
      double d = angular_distance(c, tile_center(j, grid));
      w[static_cast<std::size_t>(j)] += height * std::exp(-0.5 * (d / width) * (d / width));
    }
  }
  double total = 0.0;
  for (double& x : w) total += (x += 1e-3);
  for (double& x : w) x /= total;
  return w;
}

}  // namespace detail

/// Seeded instance around a base station with APs on a ring. Users pick an AP
/// uniformly and sit near it; in congestion mode users from
/// `congestion_from` on sit next to AP 1. The template supplies grid, ladder
/// and QoE parameters.
inline Instance synth_instance(const SynthSpec& spec, std::uint64_t seed, const Instance& tmpl = {}) {
  Rng rng(seed);
  Instance inst;
  inst.grid = tmpl.grid;
  inst.ladder = tmpl.ladder;
  inst.qoe = tmpl.qoe;
  inst.ap_count = spec.aps;
  if (!tmpl.saliency.empty()) {
    inst.saliency = tmpl.saliency;
  } else {
    for (int v = 0; v < std::max(1, spec.videos); ++v) inst.saliency.push_back(detail::synth_saliency(inst.grid, rng));
  }
  const int videos = static_cast<int>(inst.saliency.size());
  for (int n = 0; n < spec.users; ++n) {
    // Draws happen in a fixed order per user so a prefix of users does not
    // depend on the total count.
    Rng ur(rng.bits() ^ static_cast<std::uint64_t>(n));
    const bool crowd = spec.congestion && n + 1 >= spec.congestion_from && spec.aps > 0;
    const int home = crowd ? 0 : (spec.aps > 0 ? ur.integer(0, spec.aps - 1) : 0);
    auto [hx, hy] = spec.aps > 0 ? detail::ap_position(home, spec) : std::pair{0.0, 0.0};
    double spread = crowd ? spec.congestion_spread : spec.user_spread;
    double ang = ur.uniform(0.0, 2.0 * std::numbers::pi);
    double dist = spread * std::sqrt(ur.uniform());
    double x = hx + dist * std::cos(ang), y = hy + dist * std::sin(ang);
    double from_bs = std::hypot(x, y);
    if (from_bs > spec.radius) {
      x *= spec.radius / from_bs;
      y *= spec.radius / from_bs;
    }
    UserState u;
    u.id = n;
    u.video = ur.integer(0, videos - 1);
    u.r_lte = spec.lte.rate(std::hypot(x, y), spec.bandwidth_scale);
    for (int i = 0; i < spec.aps; ++i) {
      auto [ax, ay] = detail::ap_position(i, spec);
      u.r_wifi.push_back(spec.wifi.rate(std::hypot(x - ax, y - ay), spec.bandwidth_scale));
    }
    FovPrediction pred;
    pred.center = {ur.uniform(-180.0, 180.0), ur.uniform(-60.0, 60.0)};
    pred.accuracy = ur.uniform(spec.accuracy_low, spec.accuracy_high);
    u.prediction = pred;
    inst.fovs.push_back(enumerate_probable_fovs(pred, spec.extent, inst.grid, spec.guarantee));
    inst.users.push_back(std::move(u));
  }
  return inst;
}

enum class TracePattern { constant, step_drop, sinusoidal, random_walk };

inline constexpr std::string_view trace_pattern_name(TracePattern p) {
  switch (p) {
    case TracePattern::constant: return "constant";
    case TracePattern::step_drop: return "step_drop";
    case TracePattern::sinusoidal: return "sinusoidal";
    case TracePattern::random_walk: return "random_walk";
  }
  return "unknown";
}

inline TracePattern parse_trace_pattern(std::string_view name) {
  for (TracePattern p : {TracePattern::constant, TracePattern::step_drop, TracePattern::sinusoidal, TracePattern::random_walk})
    if (trace_pattern_name(p) == name) return p;
  throw ConfigError(detail::cat("unknown trace pattern '", name, "'"));
}

struct TraceSpec {
  double duration = 30.0;  // s
  double epoch = 0.5;
  TracePattern pattern = TracePattern::constant;
  double t0 = 10.0, t1 = 14.0;  // step-drop window [t0, t1)
  double low = 0.1;             // step-drop factor
  double period = 10.0, amplitude = 0.5;  // sinusoid
  double step = 0.1;            // random-walk relative step per epoch
};

/// Multiplicative profile applied to base rates. Random walks are per user.
inline NetworkTrace synth_trace(const TraceSpec& spec, const Instance& base, std::uint64_t seed) {
  NetworkTrace tr;
  tr.epoch = spec.epoch;
  tr.users = base.user_count();
  tr.aps = base.ap_count;
  const int epochs = static_cast<int>(std::llround(spec.duration / spec.epoch));
  Rng rng(seed);
  std::vector<double> walk(static_cast<std::size_t>(tr.users), 1.0);
  for (int e = 0; e < epochs; ++e) {
    const double t = e * spec.epoch;
    NetworkSnapshot s;
    for (int n = 0; n < tr.users; ++n) {
      double f = 1.0;
      switch (spec.pattern) {
        case TracePattern::constant: break;
        case TracePattern::step_drop: f = (t >= spec.t0 - 1e-9 && t < spec.t1 - 1e-9) ? spec.low : 1.0; break;
        case TracePattern::sinusoidal:
          f = std::max(0.0, 1.0 + spec.amplitude * std::sin(2.0 * std::numbers::pi * t / spec.period));
          break;
        case TracePattern::random_walk: {
          double& w = walk[static_cast<std::size_t>(n)];
          if (e > 0) w = std::max(0.0, w + spec.step * rng.normal());
          f = w;
          break;
        }
      }
      const auto& u = base.users[static_cast<std::size_t>(n)];
      s.r_lte.push_back(u.r_lte * f);
      std::vector<double> row;
      for (double r : u.r_wifi) row.push_back(r * f);
      s.r_wifi.push_back(std::move(row));
    }
    tr.snapshots.push_back(std::move(s));
  }
  return tr;
}

struct HeadMotionSpec {
  double duration = 30.0;
  double fps = 30.0;
  int gop = 15;
  double yaw_speed = 20.0;    // deg/s typical
  double pitch_limit = 60.0;
};

/// Seeded smooth head motion: yaw and pitch velocities follow a damped
/// random walk.
inline FovTrace synth_fov_trace(const HeadMotionSpec& spec, int users, std::uint64_t seed) {
  FovTrace tr;
  tr.fps = spec.fps;
  tr.gop = spec.gop;
  tr.seed = seed;
  const long frames = std::llround(spec.duration * spec.fps);
  Rng rng(seed);
  for (int n = 0; n < users; ++n) {
    std::vector<ViewDirection> views;
    ViewDirection v{rng.uniform(-180.0, 180.0), rng.uniform(-30.0, 30.0)};
    double vy = 0.0, vp = 0.0;
    const double dt = 1.0 / spec.fps;
    for (long f = 0; f < frames; ++f) {
      views.push_back(v);
      vy = 0.95 * vy + spec.yaw_speed * 0.3 * rng.normal();
      vp = 0.9 * vp + spec.yaw_speed * 0.1 * rng.normal();
      v.yaw = detail::wrap_yaw(v.yaw + vy * dt);
      v.pitch = std::clamp(v.pitch + vp * dt, -spec.pitch_limit, spec.pitch_limit);
    }
    tr.truth.push_back(std::move(views));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Scenario and session

struct SweepSpec {
  std::vector<double> bandwidth_scales;
  std::vector<int> user_counts;
  int seeds = 3;  // synthetic instances averaged per sweep point
  SynthSpec synth;
};

struct Scenario {
  std::string id = "scenario";
  Instance base;  // users, videos, grid, ladder, QoE; rates come from the trace
  FovExtent extent;
  double guarantee = 0.95;
  NetworkTrace network;
  FovTrace fov;
  std::vector<Strategy> strategies{Strategy::penalty};
  FovMode fov_mode = FovMode::predicted;
  BufferParams buffer;
  AllocationParams allocation;
  double duration = 0.0;  // s; 0 means the network trace length
  std::optional<std::uint64_t> seed;
  SweepSpec sweep;

  double session_length() const { return duration > 0.0 ? duration : network.duration(); }
};

struct SessionReport {
  std::string strategy;
  std::string policy;
  double epoch = 0.5;
  std::vector<double> system_qoe;                 // per epoch, expected
  std::vector<std::vector<double>> user_qoe;      // [epoch][user], expected
  std::vector<std::vector<double>> user_rate;     // [epoch][user], Mbps allocated
  std::vector<std::vector<double>> downloaded;    // [epoch][user], Mbit
  std::vector<double> capacity;                   // [epoch], Mbit achievable
  std::vector<Allocation> allocations;
  std::vector<bool> infeasible;                   // epochs served by the fallback split
  std::vector<std::vector<double>> samples;       // [user][frame interval]
  std::vector<StallEvent> stalls;
  std::vector<double> buffer_level;               // [epoch] mean occupancy after download
  double duration = 0.0;
  double play_time = 0.0;     // summed over users
  double stall_time = 0.0;
  double startup_time = 0.0;

  int stall_count() const { return static_cast<int>(stalls.size()); }
  double user_viewed_qoe(int n) const {
    const auto& s = samples.at(static_cast<std::size_t>(n));
    return s.empty() ? 0.0 : std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  }
  /// Mean of all per-frame samples, stalls counted as zero.
  double avg_viewed_qoe() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : samples) {
      sum += std::accumulate(s.begin(), s.end(), 0.0);
      count += s.size();
    }
    return count ? sum / static_cast<double>(count) : 0.0;
  }
  double mean_system_qoe() const {
    return system_qoe.empty() ? 0.0
                              : std::accumulate(system_qoe.begin(), system_qoe.end(), 0.0) /
                                    static_cast<double>(system_qoe.size());
  }
};

namespace detail {

/// Equal split of LTE among all users and of each AP among the users for
/// whom it is strongest; used when an epoch has no feasible allocation.
inline Allocation equal_share_split(const Instance& inst) {
  Allocation out;
  const int N = inst.user_count();
  std::vector<int> assoc, per_ap(static_cast<std::size_t>(inst.ap_count), 0);
  for (const auto& u : inst.users) {
    assoc.push_back(strongest_ap(u));
    if (assoc.back() != kNoAp) ++per_ap[static_cast<std::size_t>(assoc.back())];
  }
  for (int n = 0; n < N; ++n) {
    const auto& u = inst.users[static_cast<std::size_t>(n)];
    UserAllocation ua;
    ua.ap = assoc[static_cast<std::size_t>(n)];
    ua.d_lte = u.r_lte / N;
    ua.d_wifi.assign(static_cast<std::size_t>(inst.ap_count), 0.0);
    if (ua.ap != kNoAp)
      ua.d_wifi[static_cast<std::size_t>(ua.ap)] =
          u.r_wifi[static_cast<std::size_t>(ua.ap)] / per_ap[static_cast<std::size_t>(ua.ap)];
    ua.levels.assign(static_cast<std::size_t>(inst.tile_count()), 1);
    ua.tile_rates = level_rates(ua.levels, inst.ladder);
    out.users.push_back(std::move(ua));
  }
  return out;
}

/// Shares implied by an allocation, laid out as the solver expects.
inline std::vector<double> allocation_shares(const Allocation& alloc, const Instance& inst) {
  std::vector<double> z;
  for (int n = 0; n < inst.user_count(); ++n) {
    const auto& u = inst.users[static_cast<std::size_t>(n)];
    const auto& ua = alloc.users[static_cast<std::size_t>(n)];
    z.push_back(u.r_lte > 0.0 ? ua.d_lte / u.r_lte : 0.0);
    for (int i = 0; i < inst.ap_count; ++i) {
      double r = u.r_wifi[static_cast<std::size_t>(i)];
      z.push_back(r > 0.0 ? ua.d_wifi[static_cast<std::size_t>(i)] / r : 0.0);
    }
  }
  return z;
}

/// Tile levels one strategy would give a single user at a given rate.
inline std::vector<int> strategy_tile_levels(const Instance& single, Strategy s, double link_rate, double rate) {
  const int J = single.tile_count();
  if (rate < single.minimum_user_rate() - 1e-9) return std::vector<int>(static_cast<std::size_t>(J), 1);
  if (s == Strategy::decomposition || s == Strategy::decentralized)
    return knapsack_tiles(single.weights_of(0), single.fovs[0], single.ladder, single.qoe, link_rate, rate);
  const Instance view = s == Strategy::equal_rate ? uniform_fov_weights(single) : single;
  Allocation a;
  UserAllocation ua;
  ua.d_lte = rate;
  ua.tile_rates = relaxed_tile_rates(view, 0, rate);
  a.users.push_back(std::move(ua));
  return quantize_allocation(a, view).users[0].levels;
}

}  // namespace detail

/// Instance of one epoch: trace rates and the probable FoVs predicted for
/// the segment at each user's playhead.
inline Instance epoch_instance(const Scenario& sc, const NetworkSnapshot& snap, const std::vector<long>& head_gop) {
  Instance inst = sc.base;
  inst.fovs.clear();
  inst.ap_count = static_cast<int>(snap.r_wifi.empty() ? sc.base.ap_count : snap.r_wifi.front().size());
  for (int n = 0; n < inst.user_count(); ++n) {
    auto& u = inst.users[static_cast<std::size_t>(n)];
    u.r_lte = snap.r_lte[static_cast<std::size_t>(n)];
    u.r_wifi = snap.r_wifi[static_cast<std::size_t>(n)];
    FovPrediction p = sc.fov.predict(n, head_gop[static_cast<std::size_t>(n)], 0.0);
    u.prediction = p;
    inst.fovs.push_back(enumerate_probable_fovs(p, sc.extent, inst.grid, sc.guarantee));
  }
  return inst;
}

inline std::vector<std::string> validate_scenario(const Scenario& sc) {
  std::vector<std::string> out;
  const int N = sc.base.user_count();
  if (sc.network.users != N) out.push_back(detail::cat("network trace has ", sc.network.users, " users, scenario has ", N));
  if (sc.network.aps != sc.base.ap_count)
    out.push_back(detail::cat("network trace has ", sc.network.aps, " APs, scenario has ", sc.base.ap_count));
  if (sc.fov.users() != N) out.push_back(detail::cat("FoV trace has ", sc.fov.users(), " users, scenario has ", N));
  for (auto& e : sc.network.validate()) out.push_back(e);
  for (auto& e : sc.buffer.validate()) out.push_back(e);
  if (std::abs(sc.network.epoch - sc.buffer.segment_seconds()) > 1e-9)
    out.push_back("network epoch must equal one GoP");
  if (std::abs(sc.fov.fps - sc.buffer.fps) > 1e-9 || sc.fov.gop != sc.buffer.gop)
    out.push_back("FoV trace frame rate and GoP must match the buffer");
  for (const auto& u : sc.base.users)
    if (u.video < 0 || u.video >= static_cast<int>(sc.base.saliency.size()))
      out.push_back(detail::cat("user ", u.id, " requests unknown video ", u.video));
  return out;
}

/// Runs one session. Epochs are sequential; the result depends only on the
/// scenario.
inline SessionReport run_session(const Scenario& sc, Strategy strategy, const BufferParams& buffer) {
  const double length = sc.session_length();
  if (length > sc.network.duration() + 1e-9)
    throw DomainError(detail::cat("network trace covers ", sc.network.duration(), " s, session needs ", length, " s"));
  if (length > sc.fov.duration() + 1e-9)
    throw DomainError(detail::cat("FoV trace covers ", sc.fov.duration(), " s, session needs ", length, " s"));
  {
    Scenario check = sc;
    check.buffer = buffer;
    auto errs = validate_scenario(check);
    if (!errs.empty()) throw DomainError("invalid scenario: " + errs.front());
  }

  const int N = sc.base.user_count();
  const int J = sc.base.tile_count();
  const double epoch = sc.network.epoch;
  const int epochs = static_cast<int>(std::llround(length / epoch));

  SessionReport rep;
  rep.strategy = std::string(strategy_name(strategy));
  rep.policy = std::string(buffer_policy_name(buffer.policy));
  rep.epoch = epoch;
  rep.duration = length;
  rep.samples.assign(static_cast<std::size_t>(N), {});

  std::vector<BufferState> states;
  for (int n = 0; n < N; ++n) states.push_back(BufferState::empty(J, buffer));
  std::vector<std::optional<std::size_t>> open_stall(static_cast<std::size_t>(N));
  std::optional<std::vector<double>> warm;

  for (int e = 0; e < epochs; ++e) {
    const double now = e * epoch;
    const auto& snap = sc.network.snapshots[static_cast<std::size_t>(e)];
    std::vector<long> heads;
    for (const auto& s : states) heads.push_back(s.head_gop);
    const Instance inst = epoch_instance(sc, snap, heads);

    AllocationParams ap = sc.allocation;
    if (warm) ap.solver.warm_start = warm;
    Allocation alloc;
    bool fallback = false;
    try {
      alloc = run_strategy(inst, strategy, ap, sc.fov_mode);
      warm = detail::allocation_shares(alloc, inst);
    } catch (const InfeasibleError&) {
      alloc = detail::equal_share_split(inst);
      fallback = true;
      warm.reset();
    }
    rep.infeasible.push_back(fallback);
    rep.allocations.push_back(alloc);

    std::vector<double> uq, rates, down;
    for (int n = 0; n < N; ++n) {
      const auto N_ = static_cast<std::size_t>(n);
      const auto& ua = alloc.users[N_];
      const auto& u = inst.users[N_];
      uq.push_back(user_qoe(inst, n, ua.tile_rates));
      const double rate = ua.transmission_rate();
      rates.push_back(rate);

      const double link = u.r_lte + (ua.ap == kNoAp ? 0.0 : u.r_wifi[static_cast<std::size_t>(ua.ap)]);
      EpochContext ctx;
      ctx.rate = rate;
      ctx.epoch = epoch;
      ctx.ladder = &inst.ladder;
      const auto& weights = inst.weights_of(n);
      std::vector<double> wbar = expected_tile_weights(inst.fovs[N_], weights);
      ctx.order.resize(static_cast<std::size_t>(J));
      std::iota(ctx.order.begin(), ctx.order.end(), 0);
      std::stable_sort(ctx.order.begin(), ctx.order.end(), [&](int a, int b) {
        return wbar[static_cast<std::size_t>(a)] > wbar[static_cast<std::size_t>(b)];
      });
      const BufferState& st = states[N_];
      std::map<long, std::vector<int>> cache;
      ctx.relevel = [&, n](long gop, double r, bool trusted) {
        auto it = cache.find(gop);
        if (it != cache.end()) return it->second;
        std::array<int, 1> keep{n};
        Instance single = inst.subset(keep);
        if (trusted) {
          double lookahead = (gop - st.head_gop) * buffer.segment_seconds() - st.played / buffer.fps;
          FovPrediction p = sc.fov.predict(n, gop, lookahead);
          single.fovs[0] = enumerate_probable_fovs(p, sc.extent, single.grid, sc.guarantee);
        } else {
          single.fovs[0] = ProbableFovSet::whole_frame(J);
        }
        single = with_fov_mode(single, sc.fov_mode);
        auto levels = detail::strategy_tile_levels(single, strategy, link, r);
        cache.emplace(gop, levels);
        return levels;
      };
      DownloadPlan plan = plan_epoch(st, buffer, ctx);
      states[N_] = apply_plan(st, plan);
      down.push_back(plan.cost);
    }
    // Achievable volume: each resource fully used by its best user.
    double lte_best = 0.0;
    std::vector<double> ap_best(static_cast<std::size_t>(inst.ap_count), 0.0);
    for (const auto& u : inst.users) {
      lte_best = std::max(lte_best, u.r_lte);
      for (int i = 0; i < inst.ap_count; ++i)
        ap_best[static_cast<std::size_t>(i)] = std::max(ap_best[static_cast<std::size_t>(i)], u.r_wifi[static_cast<std::size_t>(i)]);
    }
    const double capacity = (lte_best + std::accumulate(ap_best.begin(), ap_best.end(), 0.0)) * epoch;
    rep.capacity.push_back(capacity);
    rep.system_qoe.push_back(std::accumulate(uq.begin(), uq.end(), 0.0));
    rep.user_qoe.push_back(std::move(uq));
    rep.user_rate.push_back(std::move(rates));
    rep.downloaded.push_back(std::move(down));

    double level_sum = 0.0;
    for (int n = 0; n < N; ++n) {
      const auto N_ = static_cast<std::size_t>(n);
      level_sum += states[N_].occupancy(buffer);
      const auto& weights = inst.weights_of(n);
      FrameQuality quality = [&](const std::vector<double>& r, long frame) {
        auto fov = viewport_tiles(sc.fov.view(n, frame), sc.extent, inst.grid);
        return fov_quality(r, weights, fov, inst.qoe.mu, inst.qoe, inst.ladder);
      };
      StallEvent* ongoing = open_stall[N_] ? &rep.stalls[*open_stall[N_]] : nullptr;
      PlaybackResult pr = advance_playback(states[N_], epoch, now, buffer, inst.ladder, quality, ongoing);
      auto& samples = rep.samples[N_];
      samples.insert(samples.end(), pr.samples.begin(), pr.samples.end());
      rep.play_time += pr.played_frames / buffer.fps;
      rep.stall_time += pr.stalled_frames / buffer.fps;
      rep.startup_time += pr.startup_frames / buffer.fps;
      for (auto ev : pr.stalls) {
        ev.user = n;
        rep.stalls.push_back(ev);
        open_stall[N_] = rep.stalls.size() - 1;
      }
      // A stall stays open across epochs until playback resumes.
      if (states[N_].playing) open_stall[N_].reset();
    }
    rep.buffer_level.push_back(N ? level_sum / N : 0.0);
  }
  return rep;
}

inline SessionReport run_session(const Scenario& sc) {
  return run_session(sc, sc.strategies.empty() ? Strategy::penalty : sc.strategies.front(), sc.buffer);
}

// ---------------------------------------------------------------------------
// Comparisons and sweeps

struct SweepPoint {
  std::string strategy;
  std::string axis;  // "bandwidth" or "users"
  double x = 0.0;
  double system_qoe = 0.0;  // mean over seeds
  int infeasible = 0;       // seeds without a feasible allocation
};

struct ComparisonReport {
  std::vector<SessionReport> sessions;  // one per strategy, in request order
  std::vector<SweepPoint> sweep;
};

/// Static system QoE of one strategy on synthetic instances, averaged over
/// seeds. Infeasible seeds count as zero.
inline SweepPoint sweep_point(const Scenario& sc, Strategy s, SynthSpec spec, std::string axis, double x,
                              std::uint64_t seed) {
  SweepPoint pt;
  pt.strategy = std::string(strategy_name(s));
  pt.axis = std::move(axis);
  pt.x = x;
  double total = 0.0;
  Instance tmpl;
  tmpl.grid = sc.base.grid;
  tmpl.ladder = sc.base.ladder;
  tmpl.qoe = sc.base.qoe;
  spec.extent = sc.extent;
  spec.guarantee = sc.guarantee;
  const int seeds = std::max(1, sc.sweep.seeds);
  for (int k = 0; k < seeds; ++k) {
    Instance inst = synth_instance(spec, seed + static_cast<std::uint64_t>(k), tmpl);
    try {
      Allocation a = run_strategy(inst, s, sc.allocation, sc.fov_mode);
      total += system_qoe(a, inst);
    } catch (const InfeasibleError&) {
      ++pt.infeasible;
    }
  }
  pt.system_qoe = total / seeds;
  return pt;
}

inline ComparisonReport compare_strategies(const Scenario& sc, const std::vector<Strategy>& strategies,
                                           bool run_sessions = true) {
  if (strategies.size() < 2) throw DomainError("comparison needs at least two strategies");
  if (!sc.seed) throw ConfigError("seed: required for comparisons");
  ComparisonReport out;
  if (run_sessions)
    for (Strategy s : strategies) out.sessions.push_back(run_session(sc, s, sc.buffer));
  for (Strategy s : strategies) {
    for (double scale : sc.sweep.bandwidth_scales) {
      SynthSpec spec = sc.sweep.synth;
      spec.bandwidth_scale = scale;
      out.sweep.push_back(sweep_point(sc, s, spec, "bandwidth", scale, *sc.seed));
    }
    for (int users : sc.sweep.user_counts) {
      SynthSpec spec = sc.sweep.synth;
      spec.users = users;
      out.sweep.push_back(sweep_point(sc, s, spec, "users", users, *sc.seed));
    }
  }
  return out;
}

}  // namespace tilevr
