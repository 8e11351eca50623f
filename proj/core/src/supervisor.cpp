#include "saferep/supervisor.hpp"

#include <algorithm>
#include <memory>
#include <random>
#include <stdexcept>

#include "saferep/numeric_text.hpp"

namespace saferep {

void RandomPolicyConfig::validate() const {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw std::invalid_argument("policy: amplitude must be >= 0");
  if (hold_steps == 0) throw std::invalid_argument("policy: hold_steps must be > 0");
}

double max_motor_command(const PlantParams& params) { return params.max_lift_force / (4.0 * params.thrust_coeff); }

Policy hover_policy(const PlantParams& params) {
  const MotorCommand trim = hover_trim(params);
  return [trim](const SystemState&, std::size_t) { return trim; };
}

Policy random_policy(std::uint64_t seed, const PlantParams& params, const RandomPolicyConfig& cfg) {
  cfg.validate();
  struct State {
    std::mt19937_64 rng;
    MotorCommand current{};
  };
  auto st = std::make_shared<State>();
  st->rng.seed(seed);
  const MotorCommand trim = hover_trim(params);
  const double hi = max_motor_command(params);
  return [st, trim, hi, cfg](const SystemState&, std::size_t step) {
    if (step % cfg.hold_steps == 0) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (std::size_t m = 0; m < 4; ++m) {
        st->current[m] = std::clamp(trim[m] * (1.0 + cfg.amplitude * u(st->rng)), 0.0, hi);
      }
    }
    return st->current;
  };
}

std::string to_string(EpisodeEnd end) {
  switch (end) {
    case EpisodeEnd::kSwitched: return "switched";
    case EpisodeEnd::kMaxSteps: return "max_steps";
    case EpisodeEnd::kPolicyCrash: return "policy_crash";
  }
  return "unknown";
}

EpisodeResult supervise_episode(const SystemState& x0, const Policy& policy, const DsafGrid& grid,
                                const SafetyFeatureMap& map, const PlantParams& real, const PidGains& gains,
                                const RecoveryConfig& recovery, const EpisodeConfig& cfg) {
  if (!x0.is_finite()) throw std::invalid_argument("episode: non-finite initial state");
  if (!(dsaf_query(grid, map, x0) > grid.p_t)) throw std::invalid_argument("initial state not estimated safe");

  EpisodeResult res;
  SystemState x = x0;
  for (std::size_t step = 0;; ++step) {
    const double p = dsaf_query(grid, map, x);
    if (!(p > grid.p_t)) {
      res.trace.push_back({x, p, false});
      RecoveryResult rec = simulate_recovery(x, real, gains, recovery, Source::kReal);
      res.end = EpisodeEnd::kSwitched;
      res.switch_time = static_cast<double>(step) * recovery.dt;
      res.switch_state = x;
      res.recovery_outcome = rec.outcome;
      res.feedback = std::move(rec.record);
      return res;
    }
    if (step == cfg.max_steps) {
      res.trace.push_back({x, p, false});
      res.end = EpisodeEnd::kMaxSteps;
      return res;
    }
    res.trace.push_back({x, p, true});
    x = step_dynamics(x, policy(x, step), real, recovery.dt);
    if (!x.is_finite() || x[SystemState::kPz] <= 0.0) {
      res.end = EpisodeEnd::kPolicyCrash;
      return res;
    }
  }
}

Dataset generate_dataset(std::size_t n, const StateBox& box, std::uint64_t seed, const PlantParams& params,
                         const PidGains& gains, const RecoveryConfig& recovery, Source source,
                         std::size_t store_len) {
  Dataset ds;
  ds.meta.seed = seed;
  ds.meta.params_fingerprint = params_fingerprint(params, gains, recovery);
  if (n == 0) return ds;
  ds.records = simulate_batch(sample_initial_states(n, box, seed), params, gains, recovery, source);
  if (store_len > 0) {
    for (auto& r : ds.records) {
      if (r.trajectory.size() > store_len) r.trajectory = downsample_trajectory(r.trajectory, store_len);
    }
  }
  return ds;
}

std::string params_fingerprint(const PlantParams& params, const PidGains& gains, const RecoveryConfig& recovery) {
  return hex64(fnv1a64(params.canonical() + "|" + gains.canonical() + "|" + recovery.canonical()));
}

SystemState sample_estimated_safe(const StateBox& box, std::uint64_t seed, const DsafGrid& grid,
                                  const SafetyFeatureMap& map, std::size_t max_draws) {
  box.validate();
  std::mt19937_64 rng(seed);
  for (std::size_t draw = 0; draw < max_draws; ++draw) {
    const SystemState x = sample_initial_states(1, box, rng()).front();
    if (dsaf_query(grid, map, x) > grid.p_t) return x;
  }
  throw std::runtime_error("no estimated-safe state found in " + std::to_string(max_draws) + " draws");
}

}  // namespace saferep
