#include "saferep/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "parallel.hpp"
#include "saferep/numeric_text.hpp"

namespace saferep {

namespace {

constexpr double kMinTiltDivisor = 0.1;

using Vec3 = std::array<double, 3>;

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

SystemState derivative(const SystemState& s, const Wrench& w, const PlantParams& p) {
  const double phi = s[SystemState::kRoll];
  const double theta = s[SystemState::kPitch];
  const double psi = s[SystemState::kYaw];
  const auto r = body_to_ground(phi, theta, psi);

  const Vec3 v{s[SystemState::kVx], s[SystemState::kVy], s[SystemState::kVz]};
  const Vec3 om{s[SystemState::kRollRate], s[SystemState::kPitchRate], s[SystemState::kYawRate]};

  SystemState d;
  for (std::size_t i = 0; i < 3; ++i) {
    d[SystemState::kPx + i] = r[3 * i] * v[0] + r[3 * i + 1] * v[1] + r[3 * i + 2] * v[2];
  }

  const double sphi = std::sin(phi);
  const double cphi = std::cos(phi);
  const double ctheta = std::cos(theta);
  const double ttheta = std::tan(theta);
  const double qs_rc = om[1] * sphi + om[2] * cphi;
  d[SystemState::kRoll] = om[0] + qs_rc * ttheta;
  d[SystemState::kPitch] = om[1] * cphi - om[2] * sphi;
  d[SystemState::kYaw] = qs_rc / ctheta;

  // Gravity expressed in the body frame is R^T (0, 0, -g).
  const Vec3 g_body{-p.gravity * r[6], -p.gravity * r[7], -p.gravity * r[8]};
  const Vec3 coriolis = cross(om, v);
  const double drag = p.linear_drag / p.mass;
  for (std::size_t i = 0; i < 3; ++i) {
    d[SystemState::kVx + i] = -coriolis[i] + g_body[i] - drag * v[i];
  }
  d[SystemState::kVz] += w.thrust / p.mass;

  const Vec3 iw{p.inertia[0] * om[0], p.inertia[1] * om[1], p.inertia[2] * om[2]};
  const Vec3 gyro = cross(om, iw);
  for (std::size_t i = 0; i < 3; ++i) {
    d[SystemState::kRollRate + i] = (w.torque[i] - gyro[i]) / p.inertia[i];
  }
  return d;
}

SystemState axpy(const SystemState& x, double a, const SystemState& y) {
  SystemState out;
  for (std::size_t i = 0; i < SystemState::kDim; ++i) out[i] = x[i] + a * y[i];
  return out;
}

// Attitude errors and the tilt test treat Euler angles as periodic.
double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

double vertical_speed(const SystemState& s) {
  const auto r = body_to_ground(s[SystemState::kRoll], s[SystemState::kPitch], s[SystemState::kYaw]);
  return r[6] * s[SystemState::kVx] + r[7] * s[SystemState::kVy] + r[8] * s[SystemState::kVz];
}

}  // namespace

bool SystemState::is_finite() const {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

double SystemState::norm() const {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc);
}

SystemState hover_state(double z) {
  SystemState s;
  s[SystemState::kPz] = z;
  return s;
}

void PlantParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("plant: mass must be > 0");
  if (!(max_lift_force > 0.0)) throw std::invalid_argument("plant: max_lift_force must be > 0");
  for (double i : inertia) {
    if (!(i > 0.0)) throw std::invalid_argument("plant: inertia components must be > 0");
  }
  if (!(arm_length > 0.0) || !(thrust_coeff > 0.0) || !(drag_coeff > 0.0)) {
    throw std::invalid_argument("plant: arm_length, thrust_coeff and drag_coeff must be > 0");
  }
  if (!(linear_drag >= 0.0) || !std::isfinite(gravity)) {
    throw std::invalid_argument("plant: linear_drag must be >= 0 and gravity finite");
  }
}

std::string PlantParams::canonical() const {
  std::ostringstream os;
  os << "mass=" << format_double(mass) << ";fmax=" << format_double(max_lift_force)
     << ";I=" << format_double(inertia[0]) << ',' << format_double(inertia[1]) << ','
     << format_double(inertia[2]) << ";l=" << format_double(arm_length)
     << ";k=" << format_double(thrust_coeff) << ";b=" << format_double(drag_coeff)
     << ";A=" << format_double(linear_drag) << ";g=" << format_double(gravity);
  return os.str();
}

PlantParams PlantParams::nominal() { return PlantParams{}; }

PlantParams PlantParams::real() {
  PlantParams p;
  p.mass = 0.8;
  p.max_lift_force = 145.0;
  return p;
}

void PidGains::validate() const {
  for (const PidTerm* t : {&height, &roll, &pitch, &yaw}) {
    for (double k : {t->kp, t->ki, t->kd}) {
      if (!std::isfinite(k) || k < 0.0) throw std::invalid_argument("pid: gains must be finite and >= 0");
    }
  }
}

std::string PidGains::canonical() const {
  std::ostringstream os;
  const char* names[] = {"h", "r", "p", "y"};
  const PidTerm* terms[] = {&height, &roll, &pitch, &yaw};
  for (int i = 0; i < 4; ++i) {
    os << names[i] << '=' << format_double(terms[i]->kp) << ',' << format_double(terms[i]->ki)
       << ',' << format_double(terms[i]->kd) << ';';
  }
  return os.str();
}

void RecoveryConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("recovery: dt must be > 0");
  if (!(horizon > dt)) throw std::invalid_argument("recovery: horizon must exceed dt");
  if (!(pos_z_tol > 0.0) || !(vel_tol > 0.0) || !(rate_tol > 0.0) || !(tilt_tol > 0.0)) {
    throw std::invalid_argument("recovery: settle tolerances must be > 0");
  }
  if (!(divergence_norm > 0.0)) throw std::invalid_argument("recovery: divergence_norm must be > 0");
}

std::string RecoveryConfig::canonical() const {
  std::ostringstream os;
  os << "dt=" << format_double(dt) << ";T=" << format_double(horizon)
     << ";z=" << format_double(hover_target_z) << ";tol=" << format_double(pos_z_tol) << ','
     << format_double(vel_tol) << ',' << format_double(rate_tol) << ','
     << format_double(tilt_tol) << ";div=" << format_double(divergence_norm)
     << ";hv=" << (settle_horizontal_velocity ? 1 : 0);
  return os.str();
}

std::array<double, 9> body_to_ground(double roll, double pitch, double yaw) {
  const double cf = std::cos(roll), sf = std::sin(roll);
  const double ct = std::cos(pitch), st = std::sin(pitch);
  const double cp = std::cos(yaw), sp = std::sin(yaw);
  return {cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf,
          sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf,
          -st,     ct * sf,                ct * cf};
}

Wrench motor_wrench(const MotorCommand& cmd, const PlantParams& p) {
  double total = 0.0;
  for (double w2 : cmd) total += w2;
  double scale = 1.0;
  const double thrust = p.thrust_coeff * total;
  if (thrust > p.max_lift_force) scale = p.max_lift_force / thrust;

  Wrench w;
  w.thrust = thrust * scale;
  const double lk = p.arm_length * p.thrust_coeff * scale;
  w.torque[0] = lk * (cmd[3] - cmd[1]);
  w.torque[1] = lk * (cmd[2] - cmd[0]);
  w.torque[2] = p.drag_coeff * scale * (-cmd[0] + cmd[1] - cmd[2] + cmd[3]);
  return w;
}

MotorCommand mix_motors(double thrust, const std::array<double, 3>& torque, const PlantParams& p) {
  const double a = thrust / (4.0 * p.thrust_coeff);
  const double br = torque[0] / (2.0 * p.thrust_coeff * p.arm_length);
  const double bp = torque[1] / (2.0 * p.thrust_coeff * p.arm_length);
  const double c = torque[2] / (4.0 * p.drag_coeff);
  MotorCommand m{a - bp - c, a - br + c, a + bp - c, a + br + c};
  for (double& w2 : m) w2 = std::max(w2, 0.0);
  return m;
}

MotorCommand hover_trim(const PlantParams& p) {
  const double w2 = p.mass * p.gravity / (4.0 * p.thrust_coeff);
  return {w2, w2, w2, w2};
}

SystemState step_dynamics(const SystemState& state, const MotorCommand& cmd,
                          const PlantParams& params, double dt) {
  if (!state.is_finite()) throw std::runtime_error("numerical divergence");
  if (!(dt > 0.0)) throw std::invalid_argument("step_dynamics: dt must be > 0");
  for (double w2 : cmd) {
    if (!(w2 >= 0.0)) throw std::invalid_argument("step_dynamics: motor commands must be >= 0");
  }
  const Wrench w = motor_wrench(cmd, params);
  const SystemState k1 = derivative(state, w, params);
  const SystemState k2 = derivative(axpy(state, 0.5 * dt, k1), w, params);
  const SystemState k3 = derivative(axpy(state, 0.5 * dt, k2), w, params);
  const SystemState k4 = derivative(axpy(state, dt, k3), w, params);
  SystemState next;
  for (std::size_t i = 0; i < SystemState::kDim; ++i) {
    next[i] = state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return next;
}

ControlOutput corrective_control(const SystemState& s, const PidGains& gains,
                                 const PlantParams& p, double target_height,
                                 const IntegratorState& integrator, double dt) {
  if (!s.is_finite()) throw std::invalid_argument("corrective_control: state not finite");

  const double roll = s[SystemState::kRoll];
  const double pitch = s[SystemState::kPitch];
  const double e_z = target_height - s[SystemState::kPz];
  const double e_roll = -wrap_angle(roll);
  const double e_pitch = -wrap_angle(pitch);
  const double e_yaw = -wrap_angle(s[SystemState::kYaw]);

  ControlOutput out;
  const double tilt = std::max(std::cos(roll) * std::cos(pitch), kMinTiltDivisor);
  const double accel = p.gravity + gains.height.kp * e_z + gains.height.ki * integrator.integral[0] -
                       gains.height.kd * vertical_speed(s);
  out.thrust = std::clamp(p.mass * accel / tilt, 0.0, p.max_lift_force);

  // Derivative action uses body rates, which coincide with Euler-angle
  // rates at small tilt and stay bounded at any attitude.
  out.torque[0] = (gains.roll.kp * e_roll + gains.roll.ki * integrator.integral[1] -
                   gains.roll.kd * s[SystemState::kRollRate]) * p.inertia[0];
  out.torque[1] = (gains.pitch.kp * e_pitch + gains.pitch.ki * integrator.integral[2] -
                   gains.pitch.kd * s[SystemState::kPitchRate]) * p.inertia[1];
  out.torque[2] = (gains.yaw.kp * e_yaw + gains.yaw.ki * integrator.integral[3] -
                   gains.yaw.kd * s[SystemState::kYawRate]) * p.inertia[2];

  out.motor = mix_motors(out.thrust, out.torque, p);
  out.integrator = integrator;
  out.integrator.integral[0] += e_z * dt;
  out.integrator.integral[1] += e_roll * dt;
  out.integrator.integral[2] += e_pitch * dt;
  out.integrator.integral[3] += e_yaw * dt;
  return out;
}

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kSettled: return "settled";
    case Outcome::kCrashed: return "crashed";
    case Outcome::kDiverged: return "diverged";
    case Outcome::kTimeout: return "timeout";
  }
  return "unknown";
}

bool is_settled(const SystemState& s, const RecoveryConfig& cfg) {
  if (!(std::abs(s[SystemState::kPz] - cfg.hover_target_z) < cfg.pos_z_tol)) return false;
  if (cfg.settle_horizontal_velocity) {
    const double v = std::hypot(s[SystemState::kVx], s[SystemState::kVy], s[SystemState::kVz]);
    if (!(v < cfg.vel_tol)) return false;
  } else if (!(std::abs(vertical_speed(s)) < cfg.vel_tol)) {
    return false;
  }
  const double w = std::hypot(s[SystemState::kRollRate], s[SystemState::kPitchRate],
                              s[SystemState::kYawRate]);
  if (!(w < cfg.rate_tol)) return false;
  return std::abs(wrap_angle(s[SystemState::kRoll])) < cfg.tilt_tol &&
         std::abs(wrap_angle(s[SystemState::kPitch])) < cfg.tilt_tol;
}

RecoveryResult simulate_recovery(const SystemState& x0, const PlantParams& params,
                                 const PidGains& gains, const RecoveryConfig& cfg, Source source) {
  if (!x0.is_finite()) throw std::invalid_argument("simulate_recovery: x0 not finite");
  const auto max_steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));

  RecoveryResult result;
  result.record.x0 = x0;
  result.record.source = source;
  auto& traj = result.record.trajectory;
  traj.reserve(std::min<std::size_t>(max_steps + 1, 4096));
  traj.push_back(x0);

  IntegratorState integ;
  SystemState s = x0;
  for (std::size_t step = 0;; ++step) {
    if (s[SystemState::kPz] <= 0.0) {
      result.outcome = Outcome::kCrashed;
      break;
    }
    if (s.norm() > cfg.divergence_norm) {
      result.outcome = Outcome::kDiverged;
      break;
    }
    if (is_settled(s, cfg)) {
      result.outcome = Outcome::kSettled;
      break;
    }
    if (step == max_steps) {
      result.outcome = Outcome::kTimeout;
      break;
    }
    const ControlOutput u = corrective_control(s, gains, params, cfg.hover_target_z, integ, cfg.dt);
    integ = u.integrator;
    SystemState next = step_dynamics(s, u.motor, params, cfg.dt);
    if (!next.is_finite()) {
      result.outcome = Outcome::kDiverged;
      break;
    }
    s = next;
    traj.push_back(s);
  }
  result.record.label = result.outcome == Outcome::kSettled ? 1 : 0;
  result.duration = static_cast<double>(traj.size() - 1) * cfg.dt;
  return result;
}

void StateBox::validate() const {
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const auto [lo, hi] = bounds[i];
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
      throw std::invalid_argument("state box: component " + std::to_string(i) +
                                  " has an empty or inverted range");
    }
  }
}

bool StateBox::contains(const SystemState& s) const {
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (s[i] < bounds[i].first || s[i] > bounds[i].second) return false;
  }
  return true;
}

StateBox StateBox::training_range() {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  StateBox b;
  b.bounds = {{{0.0, 0.0}, {0.0, 0.0}, {2.0, 2.0},
               {0.0, two_pi}, {0.0, two_pi}, {0.0, two_pi},
               {-3.0, 3.0}, {-3.0, 3.0}, {-3.0, 3.0},
               {-10.0, 10.0}, {-10.0, 10.0}, {-10.0, 10.0}}};
  return b;
}

StateBox StateBox::small_range() {
  constexpr double third_pi = std::numbers::pi / 3.0;
  StateBox b = training_range();
  for (std::size_t i = SystemState::kRoll; i <= SystemState::kYaw; ++i) b.bounds[i] = {-third_pi, third_pi};
  for (std::size_t i = SystemState::kRollRate; i <= SystemState::kYawRate; ++i) b.bounds[i] = {-3.0, 3.0};
  return b;
}

std::vector<SystemState> sample_initial_states(std::size_t n, const StateBox& box, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_initial_states: n must be > 0");
  box.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SystemState> out(n);
  for (auto& s : out) {
    for (std::size_t i = 0; i < SystemState::kDim; ++i) {
      const auto [lo, hi] = box.bounds[i];
      const double u = unit(rng);
      s[i] = lo == hi ? lo : std::min(hi, lo + (hi - lo) * u);
    }
  }
  return out;
}

std::vector<RecoveryRecord> simulate_batch(const std::vector<SystemState>& states,
                                           const PlantParams& params, const PidGains& gains,
                                           const RecoveryConfig& cfg, Source source) {
  params.validate();
  gains.validate();
  cfg.validate();
  std::vector<RecoveryRecord> out(states.size());
  detail::parallel_for(states.size(), [&](std::size_t i) {
    out[i] = simulate_recovery(states[i], params, gains, cfg, source).record;
  }, /*dynamic=*/true);
  return out;
}

}  // namespace saferep
