#include <gtest/gtest.h>

#include "tilevr/buffer.hpp"
#include "tilevr/random.hpp"

using namespace tilevr;

namespace {

const RepresentationLadder kLadder{{0.1, 0.2, 0.3, 0.4}};
const std::vector<int> kFov{4, 4, 1, 1};  // FoV-driven target of every segment

EpochContext context(double rate) {
  EpochContext ctx;
  ctx.rate = rate;
  ctx.epoch = 0.5;
  ctx.ladder = &kLadder;
  ctx.relevel = [](long, double, bool trusted) { return trusted ? kFov : std::vector<int>(4, 2); };
  ctx.order = {0, 1, 2, 3};
  return ctx;
}

/// Buffer with the first `slots` segments present at `level`.
BufferState filled(int slots, int level, const BufferParams& p = {}) {
  BufferState s = BufferState::empty(4, p);
  for (int k = 0; k < slots; ++k) s.slots[static_cast<std::size_t>(k)].assign(4, level);
  return s;
}

double rate_sum(const std::vector<double>& r, long) {
  double s = 0.0;
  for (double x : r) s += x;
  return s;
}

}  // namespace

TEST(SubsequentRate, Examples) {
  BufferParams p;
  EXPECT_DOUBLE_EQ(subsequent_rate(10.0, 0.0, p), 2.0);
  EXPECT_DOUBLE_EQ(subsequent_rate(10.0, 4.5, p), 10.0);
  EXPECT_DOUBLE_EQ(subsequent_rate(10.0, 5.0, p), 10.0);
  p.l = 0.0;
  for (double b : {0.0, 2.0, 4.9}) EXPECT_DOUBLE_EQ(subsequent_rate(10.0, b, p), 0.0);
}

TEST(BufferParams, Validation) {
  BufferParams p;
  EXPECT_TRUE(p.validate().empty());
  p.b1 = 6.0;
  ASSERT_FALSE(p.validate().empty());
  EXPECT_EQ(p.validate()[0], "B1 < B2 violated");
  BufferParams s = BufferParams{}.with_policy(BufferPolicy::short_buffer);
  EXPECT_DOUBLE_EQ(s.b2, 2.0);
  EXPECT_TRUE(s.validate().empty());
}

TEST(BufferState, OccupancyCountsCompletePrefix) {
  BufferParams p;
  BufferState s = filled(3, 1);
  EXPECT_DOUBLE_EQ(s.occupancy(p), 1.5);
  s.slots[1][2] = 0;
  EXPECT_DOUBLE_EQ(s.occupancy(p), 0.5);
  s.played = 5;
  EXPECT_NEAR(s.occupancy(p), 10.0 / 30.0, 1e-12);
}

TEST(PlanEpoch, EmptyBufferFillsFovRegionThenLowestLevel) {
  BufferParams p;
  BufferState s = BufferState::empty(4, p);
  DownloadPlan plan = plan_epoch(s, p, context(100.0));
  std::vector<int> fov_slots, equal_slots;
  for (const auto& e : plan.entries) {
    if (e.region == PlanRegion::fov_fill) {
      EXPECT_EQ(e.level, kFov[static_cast<std::size_t>(e.tile)]);
      if (fov_slots.empty() || fov_slots.back() != e.gop) fov_slots.push_back(static_cast<int>(e.gop));
    } else {
      ASSERT_EQ(e.region, PlanRegion::equal_fill);
      EXPECT_EQ(e.level, 1);
      if (equal_slots.empty() || equal_slots.back() != e.gop) equal_slots.push_back(static_cast<int>(e.gop));
    }
  }
  EXPECT_EQ(fov_slots, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(equal_slots, (std::vector<int>{4, 5, 6, 7, 8, 9}));
  EXPECT_NEAR(plan.cost, 4 * 0.5 + 6 * 0.2, 1e-12);
  EXPECT_LE(plan.cost, plan.budget);
  EXPECT_DOUBLE_EQ(apply_plan(s, plan).occupancy(p), 5.0);
}

TEST(PlanEpoch, FullBufferAtTopQualityIsEmpty) {
  BufferParams p;
  BufferState s = filled(10, 1);
  for (int k = 0; k < 4; ++k) s.slots[static_cast<std::size_t>(k)].assign(4, 4);
  ASSERT_DOUBLE_EQ(s.occupancy(p), p.b2);
  EXPECT_TRUE(plan_epoch(s, p, context(100.0)).entries.empty());
}

TEST(PlanEpoch, ZeroBudgetIsEmpty) {
  BufferParams p;
  EXPECT_TRUE(plan_epoch(BufferState::empty(4, p), p, context(0.0)).entries.empty());
}

TEST(PlanEpoch, AboveB1UpgradesBeforeExtending) {
  // Six lowest-level segments (3 s) and a better channel: the FoV region is
  // upgraded first, then the buffer is extended from 3 s.
  BufferParams p;
  BufferState s = filled(6, 1);
  ASSERT_DOUBLE_EQ(s.occupancy(p), 3.0);
  DownloadPlan plan = plan_epoch(s, p, context(4.0));
  ASSERT_FALSE(plan.entries.empty());
  bool extending = false;
  double upgraded = 0.0;
  for (const auto& e : plan.entries) {
    if (e.region == PlanRegion::upgrade) {
      EXPECT_FALSE(extending) << "upgrade after an extension";
      EXPECT_LT(e.gop, 4);
      upgraded += e.cost;
    } else {
      EXPECT_EQ(e.region, PlanRegion::equal_fill);
      EXPECT_GE(e.gop, 6);
      extending = true;
    }
  }
  EXPECT_GT(upgraded, 0.0);
  EXPECT_TRUE(extending);
  // Upgrades are held to the subsequent rate: l d / (B2 - B_c) over one epoch.
  EXPECT_LE(upgraded, 4.0 / 2.0 * 0.5 + 1e-12);
  BufferState next = apply_plan(s, plan);
  EXPECT_EQ(next.slots[0], kFov);
  EXPECT_LE(next.occupancy(p), p.b2);
  EXPECT_GT(next.occupancy(p), 3.0);
}

TEST(PlanEpoch, ShortBufferStopsAtB1) {
  BufferParams p = BufferParams{}.with_policy(BufferPolicy::short_buffer);
  BufferState s = BufferState::empty(4, p);
  DownloadPlan plan = plan_epoch(s, p, context(100.0));
  for (const auto& e : plan.entries) {
    EXPECT_LT(e.gop, 4);
    EXPECT_EQ(e.region, PlanRegion::fov_fill);
  }
  EXPECT_DOUBLE_EQ(apply_plan(s, plan).occupancy(p), 2.0);
}

TEST(PlanEpoch, LongBufferTrustsPredictionOnlyNearPlayhead) {
  BufferParams p = BufferParams{}.with_policy(BufferPolicy::long_buffer);
  BufferState s = BufferState::empty(4, p);
  DownloadPlan plan = plan_epoch(s, p, context(100.0));
  BufferState next = apply_plan(s, plan);
  for (int k = 0; k < 10; ++k) {
    const auto& lv = next.slots[static_cast<std::size_t>(k)];
    if (k < 4) {
      EXPECT_EQ(lv, kFov) << k;
    } else {
      EXPECT_EQ(lv, std::vector<int>(4, 4)) << k;  // uniform level at the full rate
    }
  }
  for (const auto& e : plan.entries) EXPECT_NE(e.region, PlanRegion::upgrade);
}

TEST(ApplyPlan, Examples) {
  BufferParams p;
  BufferState s = BufferState::empty(4, p);
  BufferState same = apply_plan(s, DownloadPlan{});
  EXPECT_EQ(same.slots, s.slots);

  DownloadPlan one;
  for (int j = 0; j < 4; ++j) one.entries.push_back({0, j, 1, 0.05, PlanRegion::fov_fill});
  BufferState after = apply_plan(s, one);
  EXPECT_DOUBLE_EQ(after.occupancy(p), 0.5);

  DownloadPlan up;
  up.entries.push_back({0, 2, 3, 0.15, PlanRegion::upgrade});
  BufferState upgraded = apply_plan(after, up);
  EXPECT_DOUBLE_EQ(upgraded.occupancy(p), 0.5);
  EXPECT_EQ(upgraded.slots[0][2], 3);
}

TEST(ApplyPlan, Rejections) {
  BufferParams p;
  BufferState s = filled(2, 2);
  s.head_gop = 7;
  DownloadPlan beyond;
  beyond.entries.push_back({7 + BufferState::slot_capacity(p), 0, 1, 0.05, PlanRegion::equal_fill});
  EXPECT_THROW(apply_plan(s, beyond), DomainError);
  DownloadPlan past;
  past.entries.push_back({6, 0, 1, 0.05, PlanRegion::equal_fill});
  EXPECT_THROW(apply_plan(s, past), DomainError);
  DownloadPlan lower;
  lower.entries.push_back({7, 0, 1, 0.05, PlanRegion::upgrade});
  EXPECT_THROW(apply_plan(s, lower), DomainError);
  DownloadPlan tile;
  tile.entries.push_back({9, 4, 1, 0.05, PlanRegion::equal_fill});
  EXPECT_THROW(apply_plan(s, tile), DomainError);
}

TEST(AdvancePlayback, FullBufferPlaysOneGop) {
  BufferParams p;
  BufferState s = filled(10, 2);
  auto r = advance_playback(s, 0.5, 0.0, p, kLadder, rate_sum);
  ASSERT_EQ(r.samples.size(), 15u);
  for (double x : r.samples) EXPECT_NEAR(x, 0.8, 1e-12);
  EXPECT_TRUE(r.stalls.empty());
  EXPECT_EQ(s.head_gop, 1);
  EXPECT_DOUBLE_EQ(s.occupancy(p), 4.5);
}

TEST(AdvancePlayback, EmptyBufferStalls) {
  BufferParams p;
  BufferState s = BufferState::empty(4, p);
  s.started = s.playing = true;
  auto r = advance_playback(s, 0.8, 3.0, p, kLadder, rate_sum);
  ASSERT_EQ(r.stalls.size(), 1u);
  EXPECT_DOUBLE_EQ(r.stalls[0].start, 3.0);
  EXPECT_NEAR(r.stalls[0].duration, 0.8, 1e-9);
  EXPECT_EQ(r.samples.size(), 24u);
  for (double x : r.samples) EXPECT_EQ(x, 0.0);
}

TEST(AdvancePlayback, StartupIsNotAStall) {
  BufferParams p;
  BufferState s = BufferState::empty(4, p);
  auto r = advance_playback(s, 1.0, 0.0, p, kLadder, rate_sum);
  EXPECT_TRUE(r.stalls.empty());
  EXPECT_EQ(r.startup_frames, 30);
  EXPECT_EQ(r.played_frames, 0);
}

TEST(AdvancePlayback, HalfSecondBufferThenStall) {
  BufferParams p;
  BufferState s = filled(1, 1);
  s.started = s.playing = true;
  auto r = advance_playback(s, 1.0, 0.0, p, kLadder, rate_sum);
  ASSERT_EQ(r.samples.size(), 30u);
  for (int f = 0; f < 15; ++f) EXPECT_GT(r.samples[static_cast<std::size_t>(f)], 0.0);
  for (int f = 15; f < 30; ++f) EXPECT_EQ(r.samples[static_cast<std::size_t>(f)], 0.0);
  ASSERT_EQ(r.stalls.size(), 1u);
  EXPECT_DOUBLE_EQ(r.stalls[0].start, 0.5);
  EXPECT_NEAR(r.stalls[0].duration, 0.5, 1e-9);
}

TEST(AdvancePlayback, ResumesAtThreshold) {
  BufferParams p;
  BufferState s = BufferState::empty(4, p);
  s.started = true;
  StallEvent open{0, 0.0, 0.0};
  advance_playback(s, 0.5, 0.0, p, kLadder, rate_sum, &open);
  EXPECT_NEAR(open.duration, 0.5, 1e-9);
  s = apply_plan(s, plan_epoch(s, p, context(100.0)));
  auto r = advance_playback(s, 0.5, 0.5, p, kLadder, rate_sum, &open);
  EXPECT_NEAR(open.duration, 0.5, 1e-9);
  EXPECT_EQ(r.played_frames, 15);
}

TEST(BufferProperties, RandomChannelKeepsInvariants) {
  for (BufferPolicy policy : {BufferPolicy::hierarchical, BufferPolicy::short_buffer, BufferPolicy::long_buffer}) {
    BufferParams p = BufferParams{}.with_policy(policy);
    Rng rng(static_cast<std::uint64_t>(policy) + 5);
    BufferState s = BufferState::empty(4, p);
    StallEvent* open = nullptr;
    for (int epoch = 0; epoch < 400; ++epoch) {
      double rate = rng.uniform() < 0.2 ? rng.uniform(0.0, 0.5) : rng.uniform(0.5, 6.0);
      const double b_c = s.occupancy(p);
      DownloadPlan plan = plan_epoch(s, p, context(rate));
      EXPECT_LE(plan.cost, plan.budget + 1e-9);
      for (const auto& e : plan.entries) {
        long k = e.gop - s.head_gop;
        ASSERT_GE(k, 0);
        EXPECT_GT(e.level, s.slots[static_cast<std::size_t>(k)][static_cast<std::size_t>(e.tile)]);
      }
      BufferState next = apply_plan(s, plan);
      EXPECT_LE(next.occupancy(p), p.b2 + 1e-9);
      for (std::size_t k = 0; k < s.slots.size(); ++k)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_GE(next.slots[k][j], s.slots[k][j]);
      // No fill past B1 while the FoV region still has holes.
      if (policy != BufferPolicy::long_buffer && b_c < p.b1) {
        bool extends = std::any_of(plan.entries.begin(), plan.entries.end(),
                                   [](const PlanEntry& e) { return e.region == PlanRegion::equal_fill; });
        if (extends) {
          for (int k = 0; next.slot_start(k, p) < p.b1 - 1e-9; ++k) EXPECT_TRUE(next.complete(static_cast<std::size_t>(k)));
        }
      }
      s = next;
      auto r = advance_playback(s, 0.5, epoch * 0.5, p, kLadder, rate_sum, open);
      if (!r.stalls.empty()) open = nullptr;  // a fresh stall is owned by the result
      EXPECT_EQ(r.samples.size(), 15u);
    }
  }
}

TEST(BufferProperties, AmpleConstantChannelConverges) {
  BufferParams p;
  BufferState s = BufferState::empty(4, p);
  int stalls = 0;
  for (int epoch = 0; epoch < 60; ++epoch) {
    s = apply_plan(s, plan_epoch(s, p, context(50.0)));
    if (epoch >= 10) {
      for (int k = 0; k < 10; ++k) {
        const auto& lv = s.slots[static_cast<std::size_t>(k)];
        if (s.slot_end(k, p) <= p.b1 + 1e-9) {
          EXPECT_EQ(lv, kFov) << "epoch " << epoch << " slot " << k;
        } else {
          EXPECT_EQ(lv, std::vector<int>(4, 1)) << "epoch " << epoch << " slot " << k;
        }
      }
    }
    stalls += static_cast<int>(advance_playback(s, 0.5, epoch * 0.5, p, kLadder, rate_sum).stalls.size());
  }
  EXPECT_EQ(stalls, 0);
}

TEST(BufferPolicyNames, RoundTrip) {
  for (BufferPolicy b : {BufferPolicy::hierarchical, BufferPolicy::short_buffer, BufferPolicy::long_buffer})
    EXPECT_EQ(parse_buffer_policy(buffer_policy_name(b)), b);
  EXPECT_THROW(parse_buffer_policy("bottomless"), ConfigError);
}
