#pragma once

// Per-user playback buffer of GoP segments with per-tile levels, the
// hierarchical fill/upgrade planner and the short- and long-buffer
// benchmark policies.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <numeric>
#include <string_view>
#include <vector>

#include "tilevr/core.hpp"
#include "tilevr/qoe.hpp"

namespace tilevr {

enum class BufferPolicy { hierarchical, short_buffer, long_buffer };

inline constexpr std::string_view buffer_policy_name(BufferPolicy p) {
  switch (p) {
    case BufferPolicy::hierarchical: return "hierarchical";
    case BufferPolicy::short_buffer: return "short";
    case BufferPolicy::long_buffer: return "long";
  }
  return "unknown";
}

inline BufferPolicy parse_buffer_policy(std::string_view name) {
  for (BufferPolicy p : {BufferPolicy::hierarchical, BufferPolicy::short_buffer, BufferPolicy::long_buffer})
    if (buffer_policy_name(p) == name) return p;
  throw ConfigError(detail::cat("unknown buffer policy '", name, "'"));
}

struct BufferParams {
  double b1 = 2.0;         // s, FoV-driven region
  double b2 = 5.0;         // s, maximum length
  double l = 1.0;          // subsequent-rate coefficient
  double resume = 0.5;     // s buffered before playback (re)starts
  double fps = 30.0;
  int gop = 15;            // frames per segment
  double prediction_horizon = 2.0;  // s; beyond it predictions are not trusted
  BufferPolicy policy = BufferPolicy::hierarchical;

  double segment_seconds() const { return gop / fps; }

  /// Parameters of a benchmark policy derived from these defaults.
  BufferParams with_policy(BufferPolicy p) const {
    BufferParams out = *this;
    out.policy = p;
    if (p == BufferPolicy::short_buffer) out.b2 = out.b1;
    return out;
  }

  std::vector<std::string> validate() const {
    std::vector<std::string> out;
    if (!(b1 > 0.0)) out.push_back("B1 must be positive");
    if (policy == BufferPolicy::short_buffer ? !(b1 <= b2) : !(b1 < b2)) out.push_back("B1 < B2 violated");
    if (!(l >= 0.0)) out.push_back("l must be non-negative");
    if (!(fps > 0.0)) out.push_back("fps must be positive");
    if (gop <= 0) out.push_back("GoP length must be positive");
    if (!(resume > 0.0)) out.push_back("resume threshold must be positive");
    return out;
  }
};

/// Rate for the FoV-driven allocation this epoch: l d / (B2 - B_c), capped at
/// d. A full buffer returns d.
inline double subsequent_rate(double d_estimated, double b_c, const BufferParams& params) {
  if (b_c >= params.b2) return d_estimated;
  return std::min(d_estimated, params.l * d_estimated / (params.b2 - b_c));
}

struct BufferState {
  int tiles = 0;
  long head_gop = 0;                     // GoP index of slots.front()
  int played = 0;                        // frames of the head slot already shown
  std::deque<std::vector<int>> slots;    // per-tile levels, 0 = absent
  bool playing = false;
  bool started = false;                  // false until the first resume

  static BufferState empty(int tiles, const BufferParams& params) {
    BufferState s;
    s.tiles = tiles;
    s.slots.assign(static_cast<std::size_t>(slot_capacity(params)), std::vector<int>(static_cast<std::size_t>(tiles), 0));
    return s;
  }

  static int slot_capacity(const BufferParams& p) {
    return static_cast<int>(std::ceil(p.b2 / p.segment_seconds() - 1e-9)) + 1;
  }

  bool complete(std::size_t k) const {
    return k < slots.size() && std::all_of(slots[k].begin(), slots[k].end(), [](int m) { return m >= 1; });
  }
  /// Contiguous complete slots from the head.
  int complete_prefix() const {
    int k = 0;
    while (complete(static_cast<std::size_t>(k))) ++k;
    return k;
  }
  /// Buffered playback time, seconds.
  double occupancy(const BufferParams& p) const {
    int k = complete_prefix();
    if (k == 0) return 0.0;
    return (k * p.gop - played) / p.fps;
  }
  /// Start and end of slot k relative to the playhead, seconds.
  double slot_start(int k, const BufferParams& p) const {
    return k == 0 ? 0.0 : (k * p.gop - played) / p.fps;
  }
  double slot_end(int k, const BufferParams& p) const { return ((k + 1) * p.gop - played) / p.fps; }
  int remaining_frames(int k, const BufferParams& p) const { return k == 0 ? p.gop - played : p.gop; }
};

enum class PlanRegion { fov_fill, upgrade, equal_fill };

struct PlanEntry {
  long gop = 0;   // absolute segment index
  int tile = 0;
  int level = 0;  // new level, above the buffered one
  double cost = 0.0;  // Mbit
  PlanRegion region = PlanRegion::fov_fill;
};

struct DownloadPlan {
  std::vector<PlanEntry> entries;
  double cost = 0.0;
  double budget = 0.0;
  double subsequent_rate = 0.0;
};

/// Inputs of one planning step for one user.
struct EpochContext {
  double rate = 0.0;      // Mbps available to this user this epoch
  double epoch = 0.5;     // s
  const RepresentationLadder* ladder = nullptr;
  /// FoV-driven levels for a segment at a given rate; `trusted` is false for
  /// segments beyond the prediction horizon.
  std::function<std::vector<int>(long gop, double rate, bool trusted)> relevel;
  /// Tile order for partial fills (most valuable first).
  std::vector<int> order;
};

namespace detail {

class PlanBuilder {
 public:
  PlanBuilder(const BufferState& s, const BufferParams& p, const EpochContext& ctx, DownloadPlan& plan)
      : s_(s), p_(p), ctx_(ctx), plan_(plan), levels_(s.slots.begin(), s.slots.end()) {}

  double left() const { return plan_.budget - plan_.cost; }

  /// Raises tiles of slot k toward `target` in tile order, charging until
  /// `limit` Mbit have been spent in this call. Returns false once money ran
  /// out before the slot was done.
  bool raise(int k, const std::vector<int>& target, PlanRegion region, double& limit) {
    auto& cur = levels_[static_cast<std::size_t>(k)];
    const double secs = s_.remaining_frames(k, p_) / p_.fps;
    for (int j : ctx_.order) {
      int want = target[static_cast<std::size_t>(j)];
      if (want <= cur[static_cast<std::size_t>(j)]) continue;
      double cost = ctx_.ladder->rate(want) * secs;
      if (cost > left() + 1e-12 || cost > limit + 1e-12) return false;
      plan_.entries.push_back({s_.head_gop + k, j, want, cost, region});
      plan_.cost += cost;
      limit -= cost;
      cur[static_cast<std::size_t>(j)] = want;
    }
    return true;
  }

  bool slot_complete(int k) const {
    const auto& c = levels_[static_cast<std::size_t>(k)];
    return std::all_of(c.begin(), c.end(), [](int m) { return m >= 1; });
  }
  bool in_horizon(int k) const { return s_.slot_end(k, p_) <= p_.b2 + 1e-9; }
  int slots() const { return static_cast<int>(levels_.size()); }
  bool trusted(int k) const { return s_.slot_start(k, p_) < p_.prediction_horizon - 1e-9; }

 private:
  const BufferState& s_;
  const BufferParams& p_;
  const EpochContext& ctx_;
  DownloadPlan& plan_;
  std::vector<std::vector<int>> levels_;
};

inline std::vector<int> uniform_levels(int tiles, int level) { return std::vector<int>(static_cast<std::size_t>(tiles), level); }

/// Highest level m with J * D_m <= rate, at least 1.
inline int uniform_level_for(double rate, int tiles, const RepresentationLadder& ladder) {
  int m = 1;
  while (m < ladder.size() && tiles * ladder.rate(m + 1) <= rate + 1e-12) ++m;
  return m;
}

}  // namespace detail

/// Chooses fills and upgrades for one epoch. Budget is rate * epoch Mbit.
inline DownloadPlan plan_epoch(const BufferState& state, const BufferParams& params, const EpochContext& ctx) {
  DownloadPlan plan;
  plan.budget = std::max(0.0, ctx.rate * ctx.epoch);
  const double b_c = state.occupancy(params);
  plan.subsequent_rate = subsequent_rate(ctx.rate, b_c, params);
  if (!(plan.budget > 0.0)) return plan;

  const int J = state.tiles;
  const double quality_rate = std::max(plan.subsequent_rate, J * ctx.ladder->min());
  detail::PlanBuilder b(state, params, ctx, plan);
  const int first_gap = state.complete_prefix();
  const double unlimited = plan.budget;
  const auto level_one = detail::uniform_levels(J, 1);
  auto fov_target = [&](int k) { return ctx.relevel(state.head_gop + k, quality_rate, b.trusted(k)); };

  // Fills slots from `from` while `keep(k)`; stops at the first slot it
  // cannot finish.
  auto fill = [&](int from, auto keep, auto target, PlanRegion region) {
    for (int k = from; k < b.slots() && b.in_horizon(k) && keep(k); ++k) {
      if (b.slot_complete(k)) continue;
      double limit = unlimited;
      if (!b.raise(k, target(k), region, limit)) return false;
    }
    return true;
  };
  auto upgrade = [&](int upto, double limit) {
    for (int k = 0; k < upto && k < b.slots(); ++k) {
      if (!b.raise(k, fov_target(k), PlanRegion::upgrade, limit)) return;
    }
  };
  auto before_b1 = [&](int k) { return state.slot_start(k, params) < params.b1 - 1e-9; };
  auto anywhere = [](int) { return true; };
  const double upgrade_cap = plan.subsequent_rate * ctx.epoch;

  switch (params.policy) {
    case BufferPolicy::hierarchical:
    case BufferPolicy::short_buffer:  // B2 = B1 leaves no equal region
      if (b_c < params.b1) {
        if (!fill(first_gap, before_b1, fov_target, PlanRegion::fov_fill)) break;
        upgrade(first_gap, std::min(upgrade_cap, b.left()));
        fill(first_gap, anywhere, [&](int) { return level_one; }, PlanRegion::equal_fill);
      } else {
        int b1_slots = 0;
        while (b1_slots < b.slots() && before_b1(b1_slots)) ++b1_slots;
        upgrade(std::min(b1_slots, first_gap), std::min(upgrade_cap, b.left()));
        fill(first_gap, anywhere, [&](int) { return level_one; }, PlanRegion::equal_fill);
      }
      break;
    case BufferPolicy::long_buffer: {
      const auto equal = detail::uniform_levels(J, detail::uniform_level_for(quality_rate, J, *ctx.ladder));
      fill(first_gap, anywhere,
           [&](int k) { return b.trusted(k) ? fov_target(k) : equal; },
           PlanRegion::fov_fill);
      break;
    }
  }
  return plan;
}

/// Raises levels per plan. Rejects entries outside the buffer window or that
/// would not raise a level.
inline BufferState apply_plan(const BufferState& state, const DownloadPlan& plan) {
  BufferState out = state;
  for (const auto& e : plan.entries) {
    long k = e.gop - out.head_gop;
    if (k < 0 || k >= static_cast<long>(out.slots.size()))
      throw DomainError(detail::cat("plan references segment ", e.gop, " outside the buffer window"));
    if (e.tile < 0 || e.tile >= out.tiles) throw DomainError("plan references unknown tile");
    int& cur = out.slots[static_cast<std::size_t>(k)][static_cast<std::size_t>(e.tile)];
    if (e.level <= cur) throw DomainError("plan entry does not raise the buffered level");
    cur = e.level;
  }
  return out;
}

struct StallEvent {
  int user = 0;
  double start = 0.0;     // s
  double duration = 0.0;  // s
};

struct PlaybackResult {
  std::vector<double> samples;     // one per frame interval; 0 while not playing
  std::vector<StallEvent> stalls;  // started in this call (durations so far)
  int played_frames = 0;
  int stalled_frames = 0;
  int startup_frames = 0;
};

/// Per-frame quality of a played frame: tile rates of its segment and the
/// absolute frame index.
using FrameQuality = std::function<double(const std::vector<double>& rates, long frame)>;

/// Plays `dt` seconds. Frames are shown while the head segment is complete;
/// an empty buffer starts a stall, and playback resumes once the occupancy
/// reaches the resume threshold. `now` is the session time at entry and
/// `ongoing` the stall being extended, if any.
inline PlaybackResult advance_playback(BufferState& state, double dt, double now, const BufferParams& params,
                                       const RepresentationLadder& ladder, const FrameQuality& quality,
                                       StallEvent* ongoing = nullptr) {
  PlaybackResult out;
  const int frames = static_cast<int>(std::llround(dt * params.fps));
  std::vector<double> rates(static_cast<std::size_t>(state.tiles));
  StallEvent* stall = ongoing;
  for (int f = 0; f < frames; ++f) {
    const double t = now + f / params.fps;
    if (!state.playing && state.occupancy(params) >= params.resume - 1e-9) {
      state.playing = true;
      state.started = true;
      stall = nullptr;
    }
    if (state.playing && !state.complete(0)) {
      state.playing = false;
      out.stalls.push_back({0, t, 0.0});
      stall = &out.stalls.back();
    }
    if (!state.playing) {
      out.samples.push_back(0.0);
      if (state.started) {
        ++out.stalled_frames;
        if (stall) stall->duration += 1.0 / params.fps;
      } else {
        ++out.startup_frames;
      }
      continue;
    }
    const auto& head = state.slots.front();
    for (std::size_t j = 0; j < head.size(); ++j) rates[j] = ladder.rate(head[j]);
    out.samples.push_back(quality(rates, state.head_gop * params.gop + state.played));
    ++out.played_frames;
    if (++state.played == params.gop) {
      state.slots.pop_front();
      state.slots.push_back(std::vector<int>(static_cast<std::size_t>(state.tiles), 0));
      ++state.head_gop;
      state.played = 0;
    }
  }
  return out;
}

}  // namespace tilevr
