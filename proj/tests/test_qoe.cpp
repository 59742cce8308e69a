#include <gtest/gtest.h>

#include <cmath>

#include "oracles/fixtures.hpp"
#include "tilevr/qoe.hpp"

using namespace tilevr;

namespace {

const RepresentationLadder kSmall{{0.1, 0.2, 0.3}};

/// ln(B D / D_M) with the default coefficients, written out by hand.
double hand_utility(double d, const RepresentationLadder& l) { return std::log(std::exp(1.0) * l.max() / l.min() * d / l.max()); }

/// Expected QoE summed term by term from the definition.
double hand_user_qoe(const std::vector<double>& rates, const ProbableFovSet& fovs, const std::vector<double>& w, double mu,
                     const RepresentationLadder& l) {
  double total = 0.0;
  for (const auto& f : fovs.entries) {
    double sum = 0.0, weakest = 1e300;
    for (int j : f.tiles) {
      double u = hand_utility(rates[static_cast<std::size_t>(j)], l);
      sum += w[static_cast<std::size_t>(j)] * u;
      weakest = std::min(weakest, u);
    }
    total += f.probability * (sum + mu * weakest);
  }
  return total;
}

}  // namespace

TEST(TileUtility, Examples) {
  QoeParams q;
  auto ladder = RepresentationLadder::default_ladder();
  EXPECT_NEAR(tile_utility(0.1, q, ladder), 1.0, 1e-12);
  EXPECT_NEAR(tile_utility(1.0, q, ladder), 3.3026, 1e-4);
  EXPECT_NEAR(tile_utility(1.0, q, ladder), 1.0 + std::log(10.0), 1e-12);
  EXPECT_NEAR(tile_utility(0.3, q, kSmall), 2.0986, 1e-4);
}

TEST(TileUtility, DomainErrors) {
  QoeParams q;
  EXPECT_THROW(tile_utility(0.0, q, kSmall), DomainError);
  EXPECT_THROW(tile_utility(-0.1, q, kSmall), DomainError);
  q.b = 1.0;  // U(D_1) = ln(1/3) < 0
  EXPECT_THROW(tile_utility(0.1, q, kSmall), DomainError);
}

TEST(TileUtility, IncreasingAndConcaveOnLadder) {
  QoeParams q;
  for (auto ladder : {RepresentationLadder::default_ladder(), RepresentationLadder{{0.1, 0.15, 0.4, 0.5, 1.2}}}) {
    double prev_gain = 1e300;
    for (int m = 1; m < ladder.size(); ++m) {
      double gain = tile_utility(ladder.rate(m + 1), q, ladder) - tile_utility(ladder.rate(m), q, ladder);
      EXPECT_GT(gain, 0.0);
      // Per-Mbps gain shrinks along the ladder.
      double per = gain / (ladder.rate(m + 1) - ladder.rate(m));
      EXPECT_LT(per, prev_gain);
      prev_gain = per;
    }
  }
}

TEST(FovQuality, WorkedExample) {
  QoeParams q;
  std::vector<double> rates{0.3, 0.1}, w{0.7, 0.3};
  std::vector<int> fov{0, 1};
  double want = 0.7 * (1.0 + std::log(3.0)) + 0.3;
  EXPECT_NEAR(fov_quality(rates, w, fov, 0.0, q, kSmall), want, 1e-12);
  EXPECT_NEAR(fov_quality(rates, w, fov, 0.0, q, kSmall), 1.7690, 1e-4);
  EXPECT_NEAR(fov_quality(rates, w, fov, 1.0, q, kSmall), 2.7690, 1e-4);
}

TEST(FovQuality, UniformRateFactorizes) {
  QoeParams q;
  std::vector<double> rates(5, 0.2), w{0.1, 0.2, 0.3, 0.25, 0.15};
  std::vector<int> fov{1, 3, 4};
  EXPECT_NEAR(fov_quality(rates, w, fov, 0.0, q, kSmall), 0.6 * tile_utility(0.2, q, kSmall), 1e-12);
}

TEST(FovQuality, MonotoneInEachTile) {
  QoeParams q;
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> rates(4), w{0.4, 0.3, 0.2, 0.1};
    for (auto& r : rates) r = rng.uniform(0.1, 0.3);
    std::vector<int> fov{0, 2, 3};
    double before = fov_quality(rates, w, fov, 1.0, q, kSmall);
    int j = fov[static_cast<std::size_t>(rng.integer(0, 2))];
    rates[static_cast<std::size_t>(j)] = std::min(0.3, rates[static_cast<std::size_t>(j)] + rng.uniform(0.0, 0.1));
    EXPECT_GE(fov_quality(rates, w, fov, 1.0, q, kSmall), before - 1e-12);
  }
}

TEST(FovQuality, EmptyFovRejected) {
  std::vector<double> rates{0.1}, w{1.0};
  EXPECT_THROW(fov_quality(rates, w, std::vector<int>{}, 0.0, QoeParams{}, kSmall), DomainError);
}

TEST(ExpectedUserQoe, SingleFovEqualsFovQuality) {
  QoeParams q;
  std::vector<double> rates{0.3, 0.1, 0.2}, w{0.5, 0.3, 0.2};
  ProbableFovSet set{{{{0, 2}, 1.0}}, 1.0};
  EXPECT_DOUBLE_EQ(expected_user_qoe(rates, set, w, 1.0, q, kSmall),
                   fov_quality(rates, w, std::vector<int>{0, 2}, 1.0, q, kSmall));
}

TEST(ExpectedUserQoe, TruncatedProbabilitiesAreNotRenormalized) {
  QoeParams q;
  std::vector<double> rates{0.2, 0.2, 0.2, 0.2}, w{0.25, 0.25, 0.25, 0.25};
  ProbableFovSet set{{{{0, 1}, 0.6}, {{2, 3}, 0.35}}, 0.95};
  double quality = fov_quality(rates, w, std::vector<int>{0, 1}, 1.0, q, kSmall);
  EXPECT_NEAR(expected_user_qoe(rates, set, w, 1.0, q, kSmall), 0.95 * quality, 1e-12);
}

TEST(ExpectedUserQoe, MatchesHandSummation) {
  QoeParams q;
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto w = fixtures::random_saliency(rng, 6);
    auto set = fixtures::random_fovs(rng, 6, 4, 3);
    std::vector<double> rates(6);
    for (auto& r : rates) r = rng.uniform(0.1, 0.3);
    double mu = rng.uniform(0.0, 2.0);
    EXPECT_NEAR(expected_user_qoe(rates, set, w, mu, q, kSmall), hand_user_qoe(rates, set, w, mu, kSmall), 1e-12);
  }
}

TEST(ExpectedUserQoe, LinearInProbabilities) {
  QoeParams q;
  std::vector<double> rates{0.3, 0.1, 0.2, 0.15}, w{0.4, 0.3, 0.2, 0.1};
  ProbableFovSet a{{{{0, 1}, 0.5}, {{2, 3}, 0.2}}, 0.7};
  ProbableFovSet b{{{{0, 1}, 0.1}, {{2, 3}, 0.6}}, 0.7};
  ProbableFovSet mix{{{{0, 1}, 0.3 * 0.5 + 0.7 * 0.1}, {{2, 3}, 0.3 * 0.2 + 0.7 * 0.6}}, 0.7};
  EXPECT_NEAR(expected_user_qoe(rates, mix, w, 1.0, q, kSmall),
              0.3 * expected_user_qoe(rates, a, w, 1.0, q, kSmall) + 0.7 * expected_user_qoe(rates, b, w, 1.0, q, kSmall),
              1e-12);
}

TEST(SystemQoe, SumsUsers) {
  fixtures::SmallSpec spec;
  spec.users = 3;
  Instance inst = fixtures::random_instance(5, spec);
  Rng rng(9);
  Allocation a;
  double want = 0.0;
  for (int n = 0; n < inst.user_count(); ++n) {
    UserAllocation ua;
    ua.tile_rates.resize(static_cast<std::size_t>(inst.tile_count()));
    for (auto& r : ua.tile_rates) r = rng.uniform(inst.ladder.min(), inst.ladder.max());
    want += hand_user_qoe(ua.tile_rates, inst.fovs[static_cast<std::size_t>(n)], inst.weights_of(n), inst.qoe.mu,
                          inst.ladder);
    a.users.push_back(ua);
  }
  EXPECT_NEAR(system_qoe(a, inst), want, 1e-12);

  Instance one = inst.subset(std::vector<int>{1});
  Allocation single;
  single.users.push_back(a.users[1]);
  EXPECT_DOUBLE_EQ(system_qoe(single, one), user_qoe(inst, 1, a.users[1].tile_rates));
}

TEST(SystemQoe, IdenticalUsersDouble) {
  fixtures::SmallSpec spec;
  spec.users = 1;
  Instance one = fixtures::random_instance(2, spec);
  Instance two = one;
  two.users.push_back(one.users[0]);
  two.fovs.push_back(one.fovs[0]);
  UserAllocation ua;
  ua.tile_rates.assign(static_cast<std::size_t>(one.tile_count()), 0.2);
  Allocation a1{{ua}}, a2{{ua, ua}};
  EXPECT_NEAR(system_qoe(a2, two), 2.0 * system_qoe(a1, one), 1e-12);
  EXPECT_THROW(system_qoe(a1, two), DomainError);
}

TEST(SystemQoe, WeightScalingKeepsArgmaxAtZeroMu) {
  // Scaling every weight by c scales the weighted sum by c, so the best of a
  // set of candidate rate vectors does not change.
  QoeParams q;
  Rng rng(21);
  std::vector<double> w{0.5, 0.2, 0.2, 0.1};
  ProbableFovSet set{{{{0, 1, 2}, 0.7}, {{1, 3}, 0.3}}, 1.0};
  std::vector<std::vector<double>> candidates;
  for (int k = 0; k < 30; ++k) {
    std::vector<double> r(4);
    for (auto& x : r) x = rng.uniform(0.1, 0.3);
    candidates.push_back(r);
  }
  auto best = [&](const std::vector<double>& weights) {
    std::size_t arg = 0;
    double top = -1.0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      double v = expected_user_qoe(candidates[k], set, weights, 0.0, q, kSmall);
      if (v > top) top = v, arg = k;
    }
    return std::pair{arg, top};
  };
  std::vector<double> scaled = w;
  for (auto& x : scaled) x *= 3.7;
  auto [a0, v0] = best(w);
  auto [a1, v1] = best(scaled);
  EXPECT_EQ(a0, a1);
  EXPECT_NEAR(v1, 3.7 * v0, 1e-9);
}

TEST(ExpectedTileWeights, SumsOverContainingFovs) {
  ProbableFovSet set{{{{0, 1}, 0.6}, {{1, 2}, 0.3}}, 0.9};
  std::vector<double> w{0.5, 0.3, 0.2, 0.0};
  auto wbar = expected_tile_weights(set, w);
  EXPECT_NEAR(wbar[0], 0.3, 1e-12);
  EXPECT_NEAR(wbar[1], 0.27, 1e-12);
  EXPECT_NEAR(wbar[2], 0.06, 1e-12);
  EXPECT_EQ(wbar[3], 0.0);
}
