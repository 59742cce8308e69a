#include <gtest/gtest.h>

#include "tilevr/simulator.hpp"

using namespace tilevr;

namespace {

Instance small_base(std::uint64_t seed, int users = 3, int aps = 2, double scale = 1.0) {
  SynthSpec spec;
  spec.users = users;
  spec.aps = aps;
  spec.bandwidth_scale = scale;
  return synth_instance(spec, seed);
}

/// Session over `duration` seconds on a synthetic base with the given trace.
Scenario session(const Instance& base, const TraceSpec& ts, double yaw_speed = 20.0) {
  Scenario sc;
  sc.base = base;
  sc.seed = 5;
  sc.network = synth_trace(ts, base, 5);
  HeadMotionSpec hm;
  hm.duration = ts.duration;
  hm.yaw_speed = yaw_speed;
  sc.fov = synth_fov_trace(hm, base.user_count(), 5);
  return sc;
}

void expect_same_session(const SessionReport& a, const SessionReport& b) {
  EXPECT_EQ(a.system_qoe, b.system_qoe);
  EXPECT_EQ(a.user_rate, b.user_rate);
  EXPECT_EQ(a.downloaded, b.downloaded);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.stall_count(), b.stall_count());
  EXPECT_EQ(a.stall_time, b.stall_time);
  EXPECT_EQ(a.buffer_level, b.buffer_level);
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic inputs

TEST(SynthInstance, SameSeedSameInstance) {
  SynthSpec spec;
  spec.users = 6;
  Instance a = synth_instance(spec, 17), b = synth_instance(spec, 17), c = synth_instance(spec, 18);
  EXPECT_TRUE(validate_instance(a).empty());
  ASSERT_EQ(a.user_count(), b.user_count());
  for (int n = 0; n < a.user_count(); ++n) {
    EXPECT_EQ(a.users[static_cast<std::size_t>(n)].r_lte, b.users[static_cast<std::size_t>(n)].r_lte);
    EXPECT_EQ(a.users[static_cast<std::size_t>(n)].r_wifi, b.users[static_cast<std::size_t>(n)].r_wifi);
    EXPECT_EQ(a.users[static_cast<std::size_t>(n)].video, b.users[static_cast<std::size_t>(n)].video);
  }
  EXPECT_EQ(a.saliency, b.saliency);
  EXPECT_NE(a.users[0].r_lte, c.users[0].r_lte);
}

TEST(SynthInstance, CongestionCrowdsTheFirstAp) {
  SynthSpec spec;
  spec.users = 15;
  spec.congestion = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Instance inst = synth_instance(spec, seed);
    for (int n = 5; n < 15; ++n) EXPECT_EQ(detail::strongest_ap(inst.users[static_cast<std::size_t>(n)]), 0) << n;
  }
}

TEST(SynthInstance, NoUsers) {
  SynthSpec spec;
  spec.users = 0;
  Instance inst = synth_instance(spec, 3);
  EXPECT_EQ(inst.user_count(), 0);
  EXPECT_TRUE(validate_instance(inst).empty());
  EXPECT_TRUE(penalty_heuristic(inst).users.empty());
}

TEST(SynthTrace, ConstantPattern) {
  Instance base = small_base(2);
  TraceSpec ts;
  ts.duration = 5.0;
  NetworkTrace tr = synth_trace(ts, base, 1);
  ASSERT_EQ(tr.snapshots.size(), 10u);
  for (const auto& s : tr.snapshots) EXPECT_EQ(s, tr.snapshots.front());
  EXPECT_TRUE(tr.validate().empty());
}

TEST(SynthTrace, StepDropScalesExactlyInsideTheWindow) {
  Instance base = small_base(2);
  TraceSpec ts;
  ts.duration = 10.0;
  ts.pattern = TracePattern::step_drop;
  ts.t0 = 3.0;
  ts.t1 = 6.5;
  ts.low = 0.25;
  NetworkTrace tr = synth_trace(ts, base, 1);
  for (std::size_t e = 0; e < tr.snapshots.size(); ++e) {
    const double t = 0.5 * static_cast<double>(e);
    const double f = (t >= 3.0 && t < 6.5) ? 0.25 : 1.0;
    for (int n = 0; n < base.user_count(); ++n) {
      const auto& u = base.users[static_cast<std::size_t>(n)];
      EXPECT_EQ(tr.snapshots[e].r_lte[static_cast<std::size_t>(n)], u.r_lte * f) << "t " << t;
      for (int i = 0; i < base.ap_count; ++i)
        EXPECT_EQ(tr.snapshots[e].r_wifi[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)],
                  u.r_wifi[static_cast<std::size_t>(i)] * f);
    }
  }
}

TEST(SynthTrace, RandomWalkIsSeeded) {
  Instance base = small_base(4);
  TraceSpec ts;
  ts.pattern = TracePattern::random_walk;
  EXPECT_EQ(synth_trace(ts, base, 9), synth_trace(ts, base, 9));
  EXPECT_NE(synth_trace(ts, base, 9), synth_trace(ts, base, 10));
  for (const auto& s : synth_trace(ts, base, 9).snapshots)
    for (double r : s.r_lte) EXPECT_GE(r, 0.0);
}

TEST(SynthFovTrace, SeededAndSized) {
  HeadMotionSpec hm;
  hm.duration = 4.0;
  FovTrace a = synth_fov_trace(hm, 2, 3), b = synth_fov_trace(hm, 2, 3);
  EXPECT_EQ(a.users(), 2);
  EXPECT_NEAR(a.duration(), 4.0, 1e-9);
  for (int n = 0; n < 2; ++n)
    for (long f = 0; f < 120; f += 7) {
      EXPECT_EQ(a.view(n, f).yaw, b.view(n, f).yaw);
      EXPECT_EQ(a.view(n, f).pitch, b.view(n, f).pitch);
      EXPECT_LE(std::abs(a.view(n, f).pitch), 90.0);
    }
}

// ---------------------------------------------------------------------------
// Sessions

TEST(RunSession, AmpleConstantChannelNeverStalls) {
  Instance base = small_base(11, 3, 2, 4.0);
  TraceSpec ts;
  ts.duration = 12.0;
  Scenario sc = session(base, ts, 0.0);
  SessionReport rep = run_session(sc, Strategy::penalty, sc.buffer);
  EXPECT_EQ(rep.stall_count(), 0);
  EXPECT_EQ(rep.stall_time, 0.0);
  EXPECT_EQ(std::count(rep.infeasible.begin(), rep.infeasible.end(), true), 0);

  // A still head makes every epoch the same static problem.
  std::vector<long> heads(static_cast<std::size_t>(base.user_count()), 0);
  Instance inst = epoch_instance(sc, sc.network.snapshots[0], heads);
  double fixed = system_qoe(run_strategy(inst, Strategy::penalty, sc.allocation, sc.fov_mode), inst);
  EXPECT_NEAR(rep.system_qoe.back(), fixed, 1e-6);
}

TEST(RunSession, ShortBufferStallsThroughALongDrop) {
  Instance base = small_base(11);
  TraceSpec ts;
  ts.duration = 20.0;
  ts.pattern = TracePattern::step_drop;
  ts.t0 = 8.0;
  ts.t1 = 12.0;
  ts.low = 0.05;
  Scenario sc = session(base, ts);
  SessionReport rep = run_session(sc, Strategy::penalty, sc.buffer.with_policy(BufferPolicy::short_buffer));
  EXPECT_GE(rep.stall_count(), 1);
  EXPECT_GT(rep.stall_time, 0.0);
  for (const auto& st : rep.stalls) EXPECT_GE(st.start, 8.0 - 1e-9);
}

TEST(RunSession, DownloadsStayWithinCapacity) {
  Instance base = small_base(7);
  TraceSpec ts;
  ts.duration = 10.0;
  ts.pattern = TracePattern::random_walk;
  Scenario sc = session(base, ts);
  SessionReport rep = run_session(sc, Strategy::greedy, sc.buffer);
  ASSERT_EQ(rep.downloaded.size(), 20u);
  for (std::size_t e = 0; e < rep.downloaded.size(); ++e) {
    double total = 0.0;
    for (std::size_t n = 0; n < rep.downloaded[e].size(); ++n) {
      EXPECT_LE(rep.downloaded[e][n], rep.user_rate[e][n] * rep.epoch + 1e-9);
      total += rep.downloaded[e][n];
    }
    EXPECT_LE(total, rep.capacity[e] + 1e-9);
  }
}

TEST(RunSession, ReportIsConsistent) {
  Instance base = small_base(3);
  TraceSpec ts;
  ts.duration = 8.0;
  Scenario sc = session(base, ts);
  SessionReport rep = run_session(sc, Strategy::decomposition, sc.buffer);
  EXPECT_EQ(rep.system_qoe.size(), 16u);
  EXPECT_EQ(rep.samples.size(), 3u);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : rep.samples) {
    EXPECT_EQ(s.size(), 240u);
    for (double q : s) {
      EXPECT_GE(q, 0.0);
      sum += q;
      ++count;
    }
  }
  EXPECT_NEAR(rep.avg_viewed_qoe(), sum / static_cast<double>(count), 1e-12);
  // Every frame interval is played, stalled or spent starting up.
  EXPECT_NEAR(rep.play_time + rep.stall_time + rep.startup_time, 3 * 8.0, 1e-9);
  for (std::size_t e = 0; e < rep.system_qoe.size(); ++e) {
    double users = 0.0;
    for (double q : rep.user_qoe[e]) users += q;
    EXPECT_NEAR(rep.system_qoe[e], users, 1e-9);
  }
}

TEST(RunSession, Deterministic) {
  Instance base = small_base(5);
  TraceSpec ts;
  ts.duration = 6.0;
  ts.pattern = TracePattern::random_walk;
  Scenario sc = session(base, ts);
  expect_same_session(run_session(sc, Strategy::penalty, sc.buffer), run_session(sc, Strategy::penalty, sc.buffer));
}

TEST(RunSession, TraceShorterThanSessionIsRejected) {
  Instance base = small_base(5);
  TraceSpec ts;
  ts.duration = 6.0;
  Scenario sc = session(base, ts);
  sc.duration = 8.0;
  EXPECT_THROW(run_session(sc, Strategy::penalty, sc.buffer), DomainError);
}

// ---------------------------------------------------------------------------
// Comparisons

TEST(CompareStrategies, RepeatedStrategyGivesIdenticalColumns) {
  Instance base = small_base(6);
  TraceSpec ts;
  ts.duration = 4.0;
  Scenario sc = session(base, ts);
  sc.sweep.seeds = 2;
  sc.sweep.bandwidth_scales = {0.5, 1.0};
  sc.sweep.synth.users = 3;
  ComparisonReport rep = compare_strategies(sc, {Strategy::penalty, Strategy::penalty});
  ASSERT_EQ(rep.sessions.size(), 2u);
  expect_same_session(rep.sessions[0], rep.sessions[1]);
  ASSERT_EQ(rep.sweep.size(), 4u);
  EXPECT_EQ(rep.sweep[0].system_qoe, rep.sweep[2].system_qoe);
  EXPECT_EQ(rep.sweep[1].system_qoe, rep.sweep[3].system_qoe);
}

TEST(CompareStrategies, OracleColumnBoundsThePenaltyColumn) {
  Scenario sc;
  sc.seed = 3;
  sc.sweep.seeds = 3;
  sc.sweep.synth.users = 3;
  sc.sweep.synth.aps = 2;
  sc.sweep.bandwidth_scales = {0.5, 1.0, 2.0};
  sc.sweep.user_counts = {2, 3};
  ComparisonReport rep = compare_strategies(sc, {Strategy::penalty, Strategy::exhaustive}, false);
  const std::size_t half = rep.sweep.size() / 2;
  ASSERT_EQ(half, 5u);
  for (std::size_t k = 0; k < half; ++k) {
    EXPECT_EQ(rep.sweep[k].x, rep.sweep[k + half].x);
    EXPECT_GE(rep.sweep[k + half].system_qoe, rep.sweep[k].system_qoe - 1e-9) << rep.sweep[k].axis << " " << rep.sweep[k].x;
  }
}

TEST(CompareStrategies, BandwidthSweepIsNonDecreasing) {
  Scenario sc;
  sc.seed = 2;
  sc.sweep.seeds = 3;
  sc.sweep.synth.users = 4;
  sc.sweep.bandwidth_scales = {0.5, 1.0, 2.0};
  ComparisonReport rep = compare_strategies(sc, {Strategy::penalty, Strategy::equal_rate}, false);
  ASSERT_EQ(rep.sweep.size(), 6u);
  for (std::size_t k = 0; k < rep.sweep.size(); ++k) {
    if (k % 3 == 0) continue;
    EXPECT_GE(rep.sweep[k].system_qoe, rep.sweep[k - 1].system_qoe - 1e-9) << rep.sweep[k].strategy;
  }
}

TEST(CompareStrategies, NeedsSeedAndTwoStrategies) {
  Scenario sc;
  EXPECT_THROW(compare_strategies(sc, {Strategy::penalty, Strategy::greedy}, false), ConfigError);
  sc.seed = 1;
  EXPECT_THROW(compare_strategies(sc, {Strategy::penalty}, false), DomainError);
}
