#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "saferep/dynamics.hpp"

using namespace saferep;

namespace {

double mechanical_energy(const SystemState& s, const PlantParams& p) {
  const double v2 = s[SystemState::kVx] * s[SystemState::kVx] + s[SystemState::kVy] * s[SystemState::kVy] +
                    s[SystemState::kVz] * s[SystemState::kVz];
  const double rot = p.inertia[0] * s[SystemState::kRollRate] * s[SystemState::kRollRate] +
                     p.inertia[1] * s[SystemState::kPitchRate] * s[SystemState::kPitchRate] +
                     p.inertia[2] * s[SystemState::kYawRate] * s[SystemState::kYawRate];
  return 0.5 * p.mass * v2 + 0.5 * rot + p.mass * p.gravity * s[SystemState::kPz];
}

}  // namespace

TEST(Dynamics, HoverIsEquilibrium) {
  const PlantParams p = PlantParams::nominal();
  const SystemState h = hover_state();
  const SystemState next = step_dynamics(h, hover_trim(p), p, 0.01);
  for (std::size_t i = 0; i < SystemState::kDim; ++i) EXPECT_NEAR(next[i], h[i], 1e-9) << i;
}

TEST(Dynamics, BallisticStep) {
  const PlantParams p = PlantParams::nominal();
  const double dt = 0.01;
  const SystemState next = step_dynamics(hover_state(), {0, 0, 0, 0}, p, dt);
  // Free fall with linear drag c/m from rest, solved in closed form.
  const double k = p.linear_drag / p.mass;
  const double v_exact = -p.gravity / k * (1.0 - std::exp(-k * dt));
  const double z_exact = 2.0 - p.gravity / k * (dt - (1.0 - std::exp(-k * dt)) / k);
  EXPECT_NEAR(next[SystemState::kVz], v_exact, 1e-12);
  EXPECT_NEAR(next[SystemState::kPz], z_exact, 1e-12);
  EXPECT_NEAR(next[SystemState::kPz], 2.0 - 0.5 * p.gravity * dt * dt, 1e-6);
  EXPECT_NEAR(next[SystemState::kVz], -p.gravity * dt, 2e-4);
}

TEST(Dynamics, RejectsNonFinite) {
  SystemState s = hover_state();
  s[SystemState::kVy] = std::nan("");
  const PlantParams p = PlantParams::nominal();
  try {
    step_dynamics(s, hover_trim(p), p, 0.01);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "numerical divergence");
  }
  EXPECT_THROW(step_dynamics(hover_state(), {-1, 0, 0, 0}, p, 0.01), std::invalid_argument);
}

TEST(Dynamics, EnergyConservedWithoutDragOrControl) {
  PlantParams p = PlantParams::nominal();
  p.linear_drag = 0.0;
  SystemState s = hover_state(50.0);
  s[SystemState::kRoll] = 0.3;
  s[SystemState::kVx] = 1.0;
  s[SystemState::kVz] = 2.0;
  s[SystemState::kRollRate] = 1.5;
  s[SystemState::kPitchRate] = -0.7;
  s[SystemState::kYawRate] = 0.4;
  const double e0 = mechanical_energy(s, p);
  for (int i = 0; i < 100; ++i) s = step_dynamics(s, {0, 0, 0, 0}, p, 0.01);
  EXPECT_LT(std::abs(mechanical_energy(s, p) - e0) / std::abs(e0), 1e-5);
}

TEST(Dynamics, MixerInvertsWrench) {
  const PlantParams p = PlantParams::nominal();
  const std::array<double, 3> torque{0.01, -0.02, 0.003};
  const Wrench w = motor_wrench(mix_motors(12.0, torque, p), p);
  EXPECT_NEAR(w.thrust, 12.0, 1e-9);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(w.torque[i], torque[i], 1e-12);
}

TEST(Control, HoverNeedsWeightOnly) {
  const PlantParams p = PlantParams::nominal();
  const ControlOutput u = corrective_control(hover_state(), PidGains{}, p, 2.0, {}, 0.01);
  EXPECT_NEAR(u.thrust, p.mass * p.gravity, 1e-12);
  for (double t : u.torque) EXPECT_EQ(t, 0.0);
}

TEST(Control, RollProportionalTerm) {
  const PlantParams p = PlantParams::nominal();
  SystemState s = hover_state();
  s[SystemState::kRoll] = 0.1;
  const ControlOutput u = corrective_control(s, PidGains{}, p, 2.0, {}, 0.01);
  EXPECT_NEAR(u.torque[0], -0.6 * p.inertia[0], 1e-15);
}

TEST(Control, SingularTiltIsClamped) {
  const PlantParams p = PlantParams::nominal();
  SystemState s = hover_state();
  s[SystemState::kPitch] = std::numbers::pi / 2;
  const ControlOutput u = corrective_control(s, PidGains{}, p, 2.0, {}, 0.01);
  EXPECT_TRUE(std::isfinite(u.thrust));
  EXPECT_LE(u.thrust, p.max_lift_force);
  for (double m : u.motor) EXPECT_TRUE(std::isfinite(m));
}

TEST(Recovery, HoverIsSafeImmediately) {
  const auto r = simulate_recovery(hover_state(), PlantParams::nominal(), PidGains{}, RecoveryConfig{});
  EXPECT_EQ(r.record.label, 1);
  EXPECT_EQ(r.record.trajectory.size(), 1u);
  EXPECT_EQ(r.outcome, Outcome::kSettled);
}

TEST(Recovery, ExtremeTumble) {
  SystemState s = hover_state();
  s[SystemState::kRoll] = std::numbers::pi;
  s[SystemState::kRollRate] = s[SystemState::kPitchRate] = s[SystemState::kYawRate] = 10.0;
  const RecoveryConfig cfg;
  const auto r = simulate_recovery(s, PlantParams::nominal(), PidGains{}, cfg);
  // Same rollout at half the step as the reference.
  RecoveryConfig fine = cfg;
  fine.dt = cfg.dt / 2;
  const auto ref = simulate_recovery(s, PlantParams::nominal(), PidGains{}, fine);
  EXPECT_EQ(r.record.label, ref.record.label);
  EXPECT_EQ(r.record.label, 0);
  EXPECT_EQ(r.outcome, Outcome::kCrashed);
}

TEST(Recovery, FallingStartMatchesFinerStep) {
  SystemState s = hover_state();
  s[SystemState::kVz] = -3.0;
  const RecoveryConfig cfg;
  const auto r = simulate_recovery(s, PlantParams::nominal(), PidGains{}, cfg);
  RecoveryConfig fine = cfg;
  fine.dt = cfg.dt / 2;
  const auto ref = simulate_recovery(s, PlantParams::nominal(), PidGains{}, fine);
  EXPECT_EQ(r.record.label, ref.record.label);
  EXPECT_EQ(r.record.trajectory.front(), s);
  EXPECT_GT(r.record.trajectory.size(), 1u);
}

TEST(Recovery, Deterministic) {
  SystemState s = hover_state();
  s[SystemState::kPitch] = 0.8;
  s[SystemState::kVx] = 2.0;
  const auto a = simulate_recovery(s, PlantParams::real(), PidGains{}, RecoveryConfig{});
  const auto b = simulate_recovery(s, PlantParams::real(), PidGains{}, RecoveryConfig{});
  EXPECT_EQ(a.record, b.record);
}

TEST(Recovery, CrashEndsRollout) {
  SystemState s = hover_state(0.3);
  s[SystemState::kVz] = -3.0;
  s[SystemState::kRoll] = 2.5;
  const auto r = simulate_recovery(s, PlantParams::nominal(), PidGains{}, RecoveryConfig{});
  EXPECT_EQ(r.record.label, 0);
  EXPECT_EQ(r.outcome, Outcome::kCrashed);
  EXPECT_LE(r.record.trajectory.back()[SystemState::kPz], 0.0);
  for (std::size_t i = 0; i + 1 < r.record.trajectory.size(); ++i) {
    EXPECT_GT(r.record.trajectory[i][SystemState::kPz], 0.0);
  }
}

TEST(Sampling, BoxAndDeterminism) {
  const StateBox box = StateBox::training_range();
  const auto xs = sample_initial_states(10000, box, 7);
  ASSERT_EQ(xs.size(), 10000u);
  for (const auto& x : xs) EXPECT_TRUE(box.contains(x));
  EXPECT_EQ(xs, sample_initial_states(10000, box, 7));
  EXPECT_NE(xs, sample_initial_states(10000, box, 8));
}

TEST(Sampling, DegenerateBox) {
  StateBox box;
  for (std::size_t i = 0; i < SystemState::kDim; ++i) box.bounds[i] = {0.25 * i, 0.25 * i};
  const auto xs = sample_initial_states(1, box, 3);
  ASSERT_EQ(xs.size(), 1u);
  for (std::size_t i = 0; i < SystemState::kDim; ++i) EXPECT_EQ(xs[0][i], 0.25 * i);
}

TEST(Sampling, InvertedBoxRejected) {
  StateBox box = StateBox::training_range();
  box.bounds[SystemState::kVx] = {1.0, -1.0};
  EXPECT_THROW(sample_initial_states(3, box, 1), std::invalid_argument);
}
