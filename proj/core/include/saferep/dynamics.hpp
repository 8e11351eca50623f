#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace saferep {

/// 12-component quadcopter state: ground-frame position and Euler angles
/// (roll, pitch, yaw; ZYX convention), body-frame linear and angular
/// velocities.
struct SystemState {
  static constexpr std::size_t kDim = 12;
  enum Index : std::size_t {
    kPx, kPy, kPz,
    kRoll, kPitch, kYaw,
    kVx, kVy, kVz,
    kRollRate, kPitchRate, kYawRate,
  };

  std::array<double, kDim> x{};

  double& operator[](std::size_t i) { return x[i]; }
  double operator[](std::size_t i) const { return x[i]; }

  bool is_finite() const;
  double norm() const;

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

/// Hover at height `z` with everything else at rest.
SystemState hover_state(double z = 2.0);

/// Squared rotor speeds of the four motors (rad^2/s^2).
using MotorCommand = std::array<double, 4>;

struct PlantParams {
  double mass = 1.0;
  double max_lift_force = 200.0;
  std::array<double, 3> inertia{4.856e-3, 4.856e-3, 8.801e-3};
  double arm_length = 0.225;
  double thrust_coeff = 2.980e-6;
  double drag_coeff = 1.140e-7;
  double linear_drag = 0.25;
  double gravity = 9.81;

  void validate() const;
  /// Canonical text used for fingerprints.
  std::string canonical() const;

  static PlantParams nominal();
  /// The perturbed plant standing in for the physical system.
  static PlantParams real();
};

struct PidTerm {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
};

struct PidGains {
  PidTerm height{1.5, 0.0, 2.5};
  PidTerm roll{6.0, 0.0, 1.75};
  PidTerm pitch{6.0, 0.0, 1.75};
  PidTerm yaw{6.0, 0.0, 1.75};

  void validate() const;
  std::string canonical() const;
};

struct RecoveryConfig {
  double dt = 0.01;
  double horizon = 10.0;
  double hover_target_z = 2.0;
  double pos_z_tol = 0.1;
  double vel_tol = 0.1;
  double rate_tol = 0.1;
  double tilt_tol = 0.05;
  double divergence_norm = 1.0e3;
  /// When false only the vertical ground-frame speed enters the settle test;
  /// horizontal motion is not regulated by the corrective controller.
  bool settle_horizontal_velocity = false;

  void validate() const;
  std::string canonical() const;
};

/// Accumulated errors for height, roll, pitch, yaw.
struct IntegratorState {
  std::array<double, 4> integral{};
};

struct ControlOutput {
  MotorCommand motor{};
  double thrust = 0.0;
  std::array<double, 3> torque{};
  IntegratorState integrator;
};

/// Body-to-ground rotation (row-major 3x3) for ZYX Euler angles.
std::array<double, 9> body_to_ground(double roll, double pitch, double yaw);

/// Total thrust and body torques produced by a motor command, after the
/// thrust clamp to `max_lift_force`.
struct Wrench {
  double thrust = 0.0;
  std::array<double, 3> torque{};
};
Wrench motor_wrench(const MotorCommand& cmd, const PlantParams& params);

/// Inverse of `motor_wrench` for unclamped inputs; negative squared speeds
/// are clipped to zero.
MotorCommand mix_motors(double thrust, const std::array<double, 3>& torque,
                        const PlantParams& params);

/// Motor command that exactly balances gravity at level attitude.
MotorCommand hover_trim(const PlantParams& params);

/// One classical RK4 step of the rigid-body model with the command held.
SystemState step_dynamics(const SystemState& state, const MotorCommand& cmd,
                          const PlantParams& params, double dt);

/// Height + attitude PID. The thrust divisor cos(roll)cos(pitch) is clamped
/// below at 0.1.
ControlOutput corrective_control(const SystemState& state, const PidGains& gains,
                                 const PlantParams& params, double target_height,
                                 const IntegratorState& integrator, double dt);

enum class Outcome { kSettled, kCrashed, kDiverged, kTimeout };

std::string to_string(Outcome outcome);

enum class Source { kSim, kReal };

struct RecoveryRecord {
  SystemState x0;
  int label = 0;
  std::vector<SystemState> trajectory;
  Source source = Source::kSim;

  friend bool operator==(const RecoveryRecord&, const RecoveryRecord&) = default;
};

struct RecoveryResult {
  RecoveryRecord record;
  Outcome outcome = Outcome::kTimeout;
  double duration = 0.0;
};

bool is_settled(const SystemState& state, const RecoveryConfig& cfg);

/// Closed-loop rollout from `x0` under the corrective controller.
RecoveryResult simulate_recovery(const SystemState& x0, const PlantParams& params,
                                 const PidGains& gains, const RecoveryConfig& cfg,
                                 Source source = Source::kSim);

/// Closed interval per state component.
struct StateBox {
  std::array<std::pair<double, double>, SystemState::kDim> bounds{};

  void validate() const;
  bool contains(const SystemState& s) const;

  /// p = (0, 0, 2), angles in [0, 2pi], v in [-3, 3], omega in [-10, 10].
  static StateBox training_range();
  /// Restricted exploration box: angles in [-pi/3, pi/3], omega in [-3, 3].
  static StateBox small_range();
};

std::vector<SystemState> sample_initial_states(std::size_t n, const StateBox& box,
                                               std::uint64_t seed);

/// Labels a batch of states in parallel; order of results matches `states`.
std::vector<RecoveryRecord> simulate_batch(const std::vector<SystemState>& states,
                                           const PlantParams& params, const PidGains& gains,
                                           const RecoveryConfig& cfg, Source source);

}  // namespace saferep
