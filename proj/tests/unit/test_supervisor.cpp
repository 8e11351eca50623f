#include <gtest/gtest.h>

#include <random>

#include "saferep/supervisor.hpp"

using namespace saferep;

namespace {

const Bba kSafe{0.9, 0.05, 0.05};
const Bba kUnsafe{0.05, 0.55, 0.4};

void expect_trace_property(const EpisodeResult& r, double p_t) {
  for (const auto& step : r.trace) {
    if (step.policy_action) EXPECT_GT(step.probability, p_t);
  }
}

}  // namespace

TEST(Supervisor, HoverNeverSwitches) {
  const PlantParams real = PlantParams::real();
  const DsafGrid grid(GridSpec::make(-3, 3, -3, 3, 1), kSafe, 0.6);
  EpisodeConfig cfg;
  cfg.max_steps = 300;
  const auto r = supervise_episode(hover_state(), hover_policy(real), grid, PhysicalFeatureMap{}, real, PidGains{},
                                   RecoveryConfig{}, cfg);
  EXPECT_EQ(r.end, EpisodeEnd::kMaxSteps);
  EXPECT_FALSE(r.switch_time.has_value());
  EXPECT_FALSE(r.feedback.has_value());
  EXPECT_EQ(r.trace.size(), cfg.max_steps + 1);
  expect_trace_property(r, grid.p_t);
}

TEST(Supervisor, AggressivePolicySwitches) {
  const PlantParams real = PlantParams::real();
  const DsafGrid grid(GridSpec::make(-3, 3, -3, 3, 1), kSafe, 0.6);
  const double hi = max_motor_command(real);
  const Policy push = [hi](const SystemState&, std::size_t) { return MotorCommand{hi, 0.5 * hi, hi, hi}; };
  const auto r = supervise_episode(hover_state(), push, grid, PhysicalFeatureMap{}, real, PidGains{}, RecoveryConfig{},
                                   EpisodeConfig{});
  ASSERT_EQ(r.end, EpisodeEnd::kSwitched);
  ASSERT_TRUE(r.switch_time.has_value());
  EXPECT_GT(*r.switch_time, 0.0);
  ASSERT_TRUE(r.feedback.has_value());
  EXPECT_EQ(r.feedback->x0, *r.switch_state);
  EXPECT_EQ(r.feedback->source, Source::kReal);
  EXPECT_LE(dsaf_query(grid, PhysicalFeatureMap{}, *r.switch_state), grid.p_t);
  expect_trace_property(r, grid.p_t);
}

TEST(Supervisor, SwitchAtFirstCellTransition) {
  const PlantParams real = PlantParams::real();
  const GridSpec spec = GridSpec::make(-3, 3, -3, 3, 0.5);
  DsafGrid grid(spec, kUnsafe, 0.6);
  const CellIndex home = *locate(spec, {0.1, 0.1});
  grid.at(home) = kSafe;
  SystemState x0 = hover_state();
  x0[SystemState::kVx] = 0.1;
  x0[SystemState::kVy] = 0.1;
  RandomPolicyConfig pc;
  pc.amplitude = 0.5;
  const auto r = supervise_episode(x0, random_policy(5, real, pc), grid, PhysicalFeatureMap{}, real, PidGains{},
                                   RecoveryConfig{}, EpisodeConfig{});
  ASSERT_EQ(r.end, EpisodeEnd::kSwitched);
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
    EXPECT_EQ(locate(spec, physical_feature_map(r.trace[i].x)), home);
    EXPECT_TRUE(r.trace[i].policy_action);
  }
  EXPECT_NE(locate(spec, physical_feature_map(r.trace.back().x)), home);
  EXPECT_FALSE(r.trace.back().policy_action);
}

TEST(Supervisor, RejectsUnsafeStart) {
  const DsafGrid grid(GridSpec::make(-3, 3, -3, 3, 1), kUnsafe, 0.6);
  try {
    supervise_episode(hover_state(), hover_policy(PlantParams::real()), grid, PhysicalFeatureMap{},
                      PlantParams::real(), PidGains{}, RecoveryConfig{}, EpisodeConfig{});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "initial state not estimated safe");
  }
}

TEST(RandomPolicy, SeededBoundedAndDegenerate) {
  const PlantParams p = PlantParams::real();
  const RandomPolicyConfig cfg;
  Policy a = random_policy(3, p, cfg), b = random_policy(3, p, cfg);
  const MotorCommand trim = hover_trim(p);
  for (std::size_t step = 0; step < 500; ++step) {
    const MotorCommand ua = a(hover_state(), step);
    EXPECT_EQ(ua, b(hover_state(), step));
    for (std::size_t m = 0; m < 4; ++m) {
      EXPECT_GE(ua[m], 0.0);
      EXPECT_LE(ua[m], max_motor_command(p));
      EXPECT_LE(std::abs(ua[m] - trim[m]), cfg.amplitude * trim[m] * (1 + 1e-12));
    }
  }
  RandomPolicyConfig zero;
  zero.amplitude = 0.0;
  Policy z = random_policy(9, p, zero);
  const Policy hover = hover_policy(p);
  for (std::size_t step = 0; step < 50; ++step) EXPECT_EQ(z(hover_state(), step), hover(hover_state(), step));
}

TEST(Dataset, GenerateIsReproducible) {
  const auto a = generate_dataset(30, StateBox::training_range(), 4, PlantParams::nominal(), PidGains{},
                                  RecoveryConfig{}, Source::kSim, 50);
  const auto b = generate_dataset(30, StateBox::training_range(), 4, PlantParams::nominal(), PidGains{},
                                  RecoveryConfig{}, Source::kSim, 50);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.k(), 30u);
  for (const auto& r : a.records) {
    EXPECT_LE(r.trajectory.size(), 50u);
    EXPECT_EQ(r.trajectory.front(), r.x0);
  }
}

TEST(Sampling, EstimatedSafeDraw) {
  const GridSpec spec = GridSpec::make(-3, 3, -3, 3, 1);
  DsafGrid grid(spec, kUnsafe, 0.6);
  grid.at({4, 4}) = kSafe;
  const SystemState x = sample_estimated_safe(StateBox::small_range(), 1, grid, PhysicalFeatureMap{}, 10000);
  EXPECT_GT(dsaf_query(grid, PhysicalFeatureMap{}, x), 0.6);
  EXPECT_EQ(x, sample_estimated_safe(StateBox::small_range(), 1, grid, PhysicalFeatureMap{}, 10000));
  const DsafGrid none(spec, kUnsafe, 0.6);
  EXPECT_THROW(sample_estimated_safe(StateBox::small_range(), 1, none, PhysicalFeatureMap{}, 50), std::runtime_error);
}
