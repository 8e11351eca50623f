#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "saferep/adapt.hpp"
#include "saferep/dynamics.hpp"
#include "saferep/embed.hpp"
#include "saferep/statemap.hpp"
#include "saferep/supervisor.hpp"
#include "saferep/trajdist.hpp"

namespace saferep {

/// Flat "key = value" configuration. Lookups of absent keys throw with the
/// key name.
class Config {
 public:
  /// The shipped defaults (config/defaults.cfg, compiled in).
  static Config defaults();
  static Config parse(const std::string& text, const std::string& origin);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  /// Overrides an existing key; unknown keys are rejected.
  void set(const std::string& key, const std::string& value);
  /// Parses "key=value".
  void apply_override(const std::string& assignment);

  const std::string& str(const std::string& key) const;
  double num(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t seed(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> nums(const std::string& key, std::size_t expected) const;
  std::vector<double> nums(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Stable hash of all keys and values.
  std::string fingerprint() const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

const char* default_config_text();

PlantParams plant_from_config(const Config& c, const std::string& which);  // "nominal" or "real"
PidGains gains_from_config(const Config& c);
RecoveryConfig recovery_from_config(const Config& c);
StateBox box_from_config(const Config& c, const std::string& name);  // "training" or "small"
DtwOptions dtw_from_config(const Config& c);
EmbedConfig embed_from_config(const Config& c);
MapTrainConfig map_from_config(const Config& c);
GridSpec grid_from_config(const Config& c, const std::string& prefix);  // "grid" or "baseline"
Bba bba_from_config(const Config& c, const std::string& key);
AdaptParams adapt_from_config(const Config& c);
GprKernel kernel_from_config(const Config& c);
RandomPolicyConfig policy_from_config(const Config& c);

}  // namespace saferep
