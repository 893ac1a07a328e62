#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ahrm/mechanism.hpp"

using namespace ahrm::reward;

namespace {

// One episode that spends `steps` steps in `phase` with constant components.
EpisodeRecord episode_in(int phase, const std::vector<double>& components, int steps = 10) {
  EpisodeRecord rec(3, 3);
  for (int t = 0; t < steps; ++t) rec.add_step(phase, components);
  return rec;
}

int count_kind(const std::vector<LifecycleEvent>& events, LifecycleEvent::Kind kind, int phase) {
  int n = 0;
  for (const auto& e : events) n += (e.kind == kind && e.phase == phase);
  return n;
}

std::vector<PriorityAssignment> three(const PriorityAssignment& a, const PriorityAssignment& b,
                                      const PriorityAssignment& c) {
  return {a, b, c};
}

}  // namespace

TEST(Mechanism, AdaptiveStartsFromIdentityAtLevelOne) {
  auto s = MechanismState::adaptive(3, 3, {});
  for (int k = 1; k <= 3; ++k) {
    EXPECT_EQ(s.assignment(k), PriorityAssignment::identity(3));
    EXPECT_EQ(s.level(k), 1);
    EXPECT_FALSE(s.determined(k));
    EXPECT_EQ(s.gated_level(k), 0);
    EXPECT_FALSE(s.gate(k).has_value());
  }
}

TEST(Mechanism, DeterminesExactlyAtThirtyVisitsThenFreezes) {
  auto s = MechanismState::adaptive(3, 3, {});
  // Objective 2 dominates in phase 2, then objective 0, then 1.
  for (int ep = 1; ep <= 29; ++ep) {
    s.end_episode(episode_in(2, {-0.5, 0.1 * (ep % 2 ? 1 : -1), 1.0}), ep);
    EXPECT_FALSE(s.determined(2));
  }
  auto ev = s.end_episode(episode_in(2, {-0.5, 0.1, 1.0}), 30);
  ASSERT_EQ(count_kind(ev, LifecycleEvent::Kind::kDetermined, 2), 1);
  EXPECT_TRUE(s.determined(2));
  const PriorityAssignment frozen({2, 0, 1});
  EXPECT_EQ(s.assignment(2), frozen);
  for (const auto& e : ev) {
    if (e.kind == LifecycleEvent::Kind::kDetermined) {
      EXPECT_EQ(e.visits, 30);
      EXPECT_EQ(e.episode, 30);
    }
  }

  // Completely different statistics afterwards must not move the order.
  for (int ep = 31; ep <= 120; ++ep) {
    auto later = s.end_episode(episode_in(2, {0.0, -1.0, 0.0}), ep);
    EXPECT_EQ(count_kind(later, LifecycleEvent::Kind::kDetermined, 2), 0);
    EXPECT_EQ(s.assignment(2), frozen);
  }
  // Unvisited phases stay undetermined.
  EXPECT_FALSE(s.determined(1));
  EXPECT_EQ(s.visits(1), 0);
}

TEST(Mechanism, VisitThresholdCountsPhaseVisitsNotEpisodes) {
  auto s = MechanismState::adaptive(3, 3, {});
  int ep = 0;
  // Phase 3 is visited every other episode.
  for (int i = 0; i < 59; ++i) {
    s.end_episode(episode_in(i % 2 ? 3 : 1, {1.0, -1.0, 0.5}), ++ep);
  }
  EXPECT_EQ(s.visits(3), 29);
  EXPECT_FALSE(s.determined(3));
  s.end_episode(episode_in(1, {1.0, -1.0, 0.5}), ++ep);
  s.end_episode(episode_in(3, {1.0, -1.0, 0.5}), ++ep);
  EXPECT_EQ(s.visits(3), 30);
  EXPECT_TRUE(s.determined(3));
}

TEST(Mechanism, RedetermineFlagResortsEveryThresholdVisits) {
  MechanismParams params;
  params.redetermine = true;
  auto s = MechanismState::adaptive(3, 3, params);
  for (int ep = 1; ep <= 30; ++ep) s.end_episode(episode_in(1, {1.0, -0.1, 0.2}), ep);
  EXPECT_EQ(s.assignment(1), PriorityAssignment({0, 2, 1}));
  for (int ep = 31; ep <= 60; ++ep) s.end_episode(episode_in(1, {0.1, -1.0, 0.2}), ep);
  EXPECT_EQ(s.assignment(1), PriorityAssignment({1, 2, 0}));
}

TEST(Mechanism, FixedAssignmentsNeverChange) {
  const std::vector<PriorityAssignment> fixed =
      three(PriorityAssignment({0, 2, 1}), PriorityAssignment({0, 1, 2}),
            PriorityAssignment({1, 2, 0}));
  auto s = MechanismState::fixed(fixed, {});
  for (int ep = 1; ep <= 100; ++ep) {
    auto ev = s.end_episode(episode_in(1 + ep % 3, {0.3, -1.0, 0.7}), ep);
    for (const auto& e : ev) EXPECT_NE(e.kind, LifecycleEvent::Kind::kDetermined);
  }
  for (int k = 1; k <= 3; ++k) EXPECT_EQ(s.assignment(k), fixed[k - 1]);
}

TEST(Mechanism, LevelConvergesAndInstallsThreshold) {
  auto s = MechanismState::fixed(three(PriorityAssignment({1, 0, 2}), PriorityAssignment::identity(3),
                                       PriorityAssignment::identity(3)),
                                 {});
  // Level 1 in phase 1 is objective 1: per-episode sum 10 * 0.5 = 5.
  for (int ep = 1; ep <= 19; ++ep) {
    auto ev = s.end_episode(episode_in(1, {1.0, 0.5, -1.0}), ep);
    EXPECT_TRUE(ev.empty());
  }
  EXPECT_EQ(s.history(1, 1).size(), 19u);
  auto ev = s.end_episode(episode_in(1, {1.0, 0.5, -1.0}), 20);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, LifecycleEvent::Kind::kLevelConverged);
  EXPECT_EQ(ev[0].level, 1);
  EXPECT_DOUBLE_EQ(ev[0].tau, 5.0);
  EXPECT_EQ(s.level(1), 2);
  EXPECT_EQ(s.gated_level(1), 1);
  ASSERT_TRUE(s.gate(1).has_value());
  EXPECT_DOUBLE_EQ(*s.gate(1), 5.0);
  // Level 2 is objective 1 + objective 0: 15 per episode.
  for (int ep = 21; ep <= 40; ++ep) s.end_episode(episode_in(1, {1.0, 0.5, -1.0}), ep);
  EXPECT_EQ(s.level(1), 3);
  EXPECT_DOUBLE_EQ(*s.tau(1, 2), 15.0);
  EXPECT_DOUBLE_EQ(*s.gate(1), 15.0);
  // The top level converges too but stays at N.
  for (int ep = 41; ep <= 60; ++ep) s.end_episode(episode_in(1, {1.0, 0.5, -1.0}), ep);
  EXPECT_EQ(s.level(1), 3);
  EXPECT_DOUBLE_EQ(*s.tau(1, 3), 5.0);
  EXPECT_DOUBLE_EQ(*s.gate(1), 15.0);
}

TEST(Mechanism, LevelsNonDecreasingAndThresholdsMatchConvergence) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> phase(1, 3);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> len(5, 40);
  auto s = MechanismState::adaptive(3, 3, {});
  std::vector<int> prev_level(3, 1);
  std::vector<int> converged(3, 0);
  for (int ep = 1; ep <= 400; ++ep) {
    EpisodeRecord rec(3, 3);
    const int steps = len(rng);
    for (int t = 0; t < steps; ++t) {
      rec.add_step(phase(rng), std::vector<double>{1.0, coin(rng) ? 1.0 : -1.0, t < 20 ? 1.0 : -1.0});
    }
    for (const auto& e : s.end_episode(rec, ep)) {
      if (e.kind == LifecycleEvent::Kind::kLevelConverged) ++converged[e.phase - 1];
    }
    for (int k = 1; k <= 3; ++k) {
      EXPECT_GE(s.level(k), prev_level[k - 1]);
      prev_level[k - 1] = s.level(k);
      int set = 0;
      for (int j = 1; j <= 3; ++j) set += s.tau(k, j).has_value();
      EXPECT_EQ(set, converged[k - 1]);
    }
  }
}

TEST(Mechanism, ForceLevelInstallsGate) {
  auto s = MechanismState::adaptive(3, 3, {});
  s.force_level(1, 2, 1000.0);
  EXPECT_EQ(s.level(1), 2);
  EXPECT_EQ(s.gated_level(1), 1);
  EXPECT_DOUBLE_EQ(*s.gate(1), 1000.0);
  EXPECT_THROW(s.force_level(1, 4, 0.0), std::invalid_argument);
}

TEST(Mechanism, RejectsBadParams) {
  MechanismParams p;
  p.window = 1;
  EXPECT_THROW(MechanismState::adaptive(3, 3, p), std::invalid_argument);
  p = {};
  p.visit_threshold = 0;
  EXPECT_THROW(MechanismState::adaptive(3, 3, p), std::invalid_argument);
}

class ShapedRewardTest : public ::testing::Test {
 protected:
  // Phase 1 favours objective 0, phase 2 objective 1, phase 3 objective 2.
  MechanismState state = MechanismState::fixed(
      three(PriorityAssignment({0, 1, 2}), PriorityAssignment({1, 2, 0}),
            PriorityAssignment({2, 0, 1})),
      {});
  std::vector<double> c{1.0, -1.0, 1.0};
  std::vector<CircleBoundary> boundaries{{Eigen::Vector2d(0.5, 0.5), 0.3},
                                         {Eigen::Vector2d(0.5, 0.86), 0.1}};
};

TEST_F(ShapedRewardTest, FarFromBoundariesIsOwnHierarchy) {
  // Distance 0.45 from c: s12 = -0.15.
  EXPECT_EQ(shaped_reward(c, Eigen::Vector2d(0.05, 0.5), 1, state, boundaries), 1.0);
  // Distance 0.05 from c, 0.31 from the target.
  EXPECT_EQ(shaped_reward(c, Eigen::Vector2d(0.5, 0.55), 2, state, boundaries), -1.0);
}

TEST_F(ShapedRewardTest, OnBoundaryIsMeanOfBothSides) {
  const Eigen::Vector2d on_b12(0.8, 0.5);
  const double r1 = hierarchy_reward(c, state.assignment(1), 1);
  const double r2 = hierarchy_reward(c, state.assignment(2), 1);
  EXPECT_NEAR(shaped_reward(c, on_b12, 1, state, boundaries), 0.5 * (r1 + r2), 1e-12);
  EXPECT_NEAR(shaped_reward(c, on_b12, 2, state, boundaries), 0.5 * (r1 + r2), 1e-12);
}

TEST_F(ShapedRewardTest, FullLevelOnBoundaryIsFullSum) {
  for (int k = 1; k <= 3; ++k) state.force_level(k, 3, std::nullopt);
  const std::vector<double> ones{1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(shaped_reward(ones, Eigen::Vector2d(0.8, 0.5), 1, state, boundaries), 3.0);
}

TEST_F(ShapedRewardTest, OverlappingBandsUseNearestBoundary) {
  // s12 = 0.3 - 0.255 = 0.045, s23 = 0.1 - 0.105 = -0.005: both inside the
  // band, b(2,3) is nearer. Hand value: (1 - w) * R_2 + w * R_3 with
  // R_2 = c[1] = -1, R_3 = c[2] = +1 at level 1, w = 0.5 * (1 + tanh(-0.5)).
  const Eigen::Vector2d p(0.5, 0.755);
  const double w = 0.5 * (1.0 + std::tanh(100.0 * -0.005));
  EXPECT_NEAR(shaped_reward(c, p, 2, state, boundaries), (1.0 - w) * -1.0 + w * 1.0, 1e-12);
}

TEST_F(ShapedRewardTest, PhaseThreeBlendsWithPhaseTwoOnly) {
  // Inside the target circle: s23 = 0.1 - 0.07 = 0.03. s12 = 0.01 is inside
  // its band too, but b(1,2) does not border phase 3.
  const Eigen::Vector2d p(0.5, 0.79);
  const double s23 = 0.1 - (p - boundaries[1].center).norm();
  const double w = 0.5 * (1.0 + std::tanh(100.0 * s23));
  EXPECT_NEAR(shaped_reward(c, p, 3, state, boundaries), (1.0 - w) * -1.0 + w * 1.0, 1e-12);
}
