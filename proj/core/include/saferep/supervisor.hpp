#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "saferep/data.hpp"
#include "saferep/dsaf.hpp"
#include "saferep/dynamics.hpp"
#include "saferep/statemap.hpp"

namespace saferep {

/// Action for the current state; `step` counts from 0 within the episode.
using Policy = std::function<MotorCommand(const SystemState& x, std::size_t step)>;

struct RandomPolicyConfig {
  /// Per-motor perturbation as a fraction of the hover trim.
  double amplitude = 0.1;
  /// A new perturbation is drawn every `hold_steps` steps.
  std::size_t hold_steps = 10;

  void validate() const;
};

/// Upper bound on a single motor command: a quarter of the lift limit.
double max_motor_command(const PlantParams& params);

Policy hover_policy(const PlantParams& params);
/// Uniform perturbations of each motor around hover trim, clipped to
/// [0, max_motor_command]. Each returned closure owns its generator.
Policy random_policy(std::uint64_t seed, const PlantParams& params, const RandomPolicyConfig& cfg);

struct EpisodeStep {
  SystemState x;
  double probability = 0.0;
  /// True when the policy acted from this state, false when the corrective
  /// controller took over here.
  bool policy_action = false;
};

enum class EpisodeEnd { kSwitched, kMaxSteps, kPolicyCrash };

std::string to_string(EpisodeEnd end);

struct EpisodeResult {
  EpisodeEnd end = EpisodeEnd::kMaxSteps;
  std::optional<double> switch_time;
  std::optional<SystemState> switch_state;
  std::optional<RecoveryRecord> feedback;
  std::optional<Outcome> recovery_outcome;
  std::vector<EpisodeStep> trace;
};

struct EpisodeConfig {
  std::size_t max_steps = 1000;
};

/// Runs `policy` on the real plant while the grid estimates the state safe
/// (probability > p_t) and hands over to the corrective controller at the
/// first state that is not. The recovery becomes a real feedback record.
EpisodeResult supervise_episode(const SystemState& x0, const Policy& policy, const DsafGrid& grid,
                                const SafetyFeatureMap& map, const PlantParams& real, const PidGains& gains,
                                const RecoveryConfig& recovery, const EpisodeConfig& cfg);

/// Labels freshly sampled states on `params`; trajectories are downsampled to
/// `store_len` samples (0 keeps them whole).
Dataset generate_dataset(std::size_t n, const StateBox& box, std::uint64_t seed, const PlantParams& params,
                         const PidGains& gains, const RecoveryConfig& recovery, Source source,
                         std::size_t store_len);

/// Fingerprint of everything that determines a record's label.
std::string params_fingerprint(const PlantParams& params, const PidGains& gains, const RecoveryConfig& recovery);

/// Draws states from `box` until one is estimated safe; throws after
/// `max_draws` attempts.
SystemState sample_estimated_safe(const StateBox& box, std::uint64_t seed, const DsafGrid& grid,
                                  const SafetyFeatureMap& map, std::size_t max_draws);

}  // namespace saferep
