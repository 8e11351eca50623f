#include "saferep/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "saferep/numeric_text.hpp"

namespace saferep {

namespace {

const char kDefaultConfig[] =
#include "saferep/default_config.inc"
    ;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

}  // namespace

const char* default_config_text() { return kDefaultConfig; }

Config Config::defaults() { return parse(kDefaultConfig, "built-in defaults"); }

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  c.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key or value");
    }
    if (!c.values_.emplace(key, value).second) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("unknown config key '" + key + "'");
  if (trim(value).empty()) throw std::runtime_error("empty value for config key '" + key + "'");
  it->second = trim(value);
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::runtime_error("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& Config::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("config key '" + key + "' missing from " + origin_);
  return it->second;
}

double Config::num(const std::string& key) const {
  try {
    return parse_double(str(key));
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("config key '" + key + "' is not a number: '" + str(key) + "'");
  }
}

std::int64_t Config::integer(const std::string& key) const {
  try {
    return parse_int(str(key));
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("config key '" + key + "' is not an integer: '" + str(key) + "'");
  }
}

std::size_t Config::count(const std::string& key) const {
  const auto v = integer(key);
  if (v < 0) throw std::runtime_error("config key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

std::uint64_t Config::seed(const std::string& key) const { return static_cast<std::uint64_t>(count(key)); }

bool Config::flag(const std::string& key) const {
  const auto& v = str(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::runtime_error("config key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<double> Config::nums(const std::string& key) const {
  std::vector<double> out;
  for (const auto& t : split_ws(str(key))) {
    try {
      out.push_back(parse_double(t));
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config key '" + key + "' has a non-numeric entry '" + t + "'");
    }
  }
  return out;
}

std::vector<double> Config::nums(const std::string& key, std::size_t expected) const {
  auto v = nums(key);
  if (v.size() != expected) {
    throw std::runtime_error("config key '" + key + "' needs " + std::to_string(expected) + " values, got " +
                             std::to_string(v.size()));
  }
  return v;
}

std::string Config::fingerprint() const {
  std::string canon;
  for (const auto& [k, v] : values_) canon += k + "=" + v + "\n";
  return hex64(fnv1a64(canon));
}

PlantParams plant_from_config(const Config& c, const std::string& which) {
  PlantParams p;
  p.mass = c.num("plant." + which + ".mass");
  p.max_lift_force = c.num("plant." + which + ".max_lift_force");
  const auto inertia = c.nums("plant.inertia", 3);
  p.inertia = {inertia[0], inertia[1], inertia[2]};
  p.arm_length = c.num("plant.arm_length");
  p.thrust_coeff = c.num("plant.thrust_coeff");
  p.drag_coeff = c.num("plant.drag_coeff");
  p.linear_drag = c.num("plant.linear_drag");
  p.gravity = c.num("plant.gravity");
  p.validate();
  return p;
}

PidGains gains_from_config(const Config& c) {
  auto term = [&](const char* key) {
    const auto v = c.nums(std::string("pid.") + key, 3);
    return PidTerm{v[0], v[1], v[2]};
  };
  PidGains g{term("height"), term("roll"), term("pitch"), term("yaw")};
  g.validate();
  return g;
}

RecoveryConfig recovery_from_config(const Config& c) {
  RecoveryConfig r;
  r.dt = c.num("recovery.dt");
  r.horizon = c.num("recovery.horizon");
  r.hover_target_z = c.num("recovery.hover_target_z");
  r.pos_z_tol = c.num("recovery.tol_pos_z");
  r.vel_tol = c.num("recovery.tol_vel");
  r.rate_tol = c.num("recovery.tol_rate");
  r.tilt_tol = c.num("recovery.tol_tilt");
  r.divergence_norm = c.num("recovery.divergence_norm");
  r.settle_horizontal_velocity = c.flag("recovery.settle_horizontal_velocity");
  r.validate();
  return r;
}

StateBox box_from_config(const Config& c, const std::string& name) {
  const std::string p = "range." + name + ".";
  const double pz = c.num(p + "p_z");
  const auto angle = c.nums(p + "angle", 2);
  const auto vel = c.nums(p + "velocity", 2);
  const auto rate = c.nums(p + "rate", 2);
  StateBox box;
  box.bounds[SystemState::kPx] = {0.0, 0.0};
  box.bounds[SystemState::kPy] = {0.0, 0.0};
  box.bounds[SystemState::kPz] = {pz, pz};
  for (std::size_t i = 0; i < 3; ++i) {
    box.bounds[SystemState::kRoll + i] = {angle[0], angle[1]};
    box.bounds[SystemState::kVx + i] = {vel[0], vel[1]};
    box.bounds[SystemState::kRollRate + i] = {rate[0], rate[1]};
  }
  box.validate();
  return box;
}

DtwOptions dtw_from_config(const Config& c) {
  DtwOptions o;
  o.downsample_len = c.count("dtw.downsample_len");
  o.band_fraction = c.num("dtw.band_fraction");
  const auto w = c.nums("dtw.weights", SystemState::kDim);
  for (std::size_t i = 0; i < SystemState::kDim; ++i) {
    if (!(w[i] >= 0.0)) throw std::runtime_error("config key 'dtw.weights' entries must be >= 0");
    o.weights[i] = w[i];
  }
  if (o.downsample_len < 2) throw std::runtime_error("config key 'dtw.downsample_len' must be >= 2");
  return o;
}

EmbedConfig embed_from_config(const Config& c) {
  EmbedConfig e;
  e.perplexity = c.num("embed.perplexity");
  e.search_tol = c.num("embed.tol");
  e.out_dim = c.count("embed.dim");
  e.iters = c.count("embed.iters");
  e.exaggeration = c.num("embed.exaggeration");
  e.exaggeration_iters = c.count("embed.exaggeration_iters");
  e.learning_rate = c.num("embed.learning_rate");
  const auto mom = c.nums("embed.momentum", 2);
  e.momentum_initial = mom[0];
  e.momentum_final = mom[1];
  e.momentum_switch_iter = c.count("embed.momentum_switch");
  e.init_std = c.num("embed.init_std");
  e.seed = c.seed("embed.seed");
  return e;
}

MapTrainConfig map_from_config(const Config& c) {
  MapTrainConfig m;
  m.hidden.clear();
  for (double h : c.nums("map.hidden")) {
    if (!(h >= 1.0) || h != static_cast<double>(static_cast<std::size_t>(h))) {
      throw std::runtime_error("config key 'map.hidden' needs positive integer widths");
    }
    m.hidden.push_back(static_cast<std::size_t>(h));
  }
  m.epochs = c.count("map.epochs");
  m.batch_size = c.count("map.batch");
  m.learning_rate = c.num("map.learning_rate");
  m.angle_features = c.flag("map.angle_features");
  m.seed = c.seed("map.seed");
  m.validate();
  return m;
}

GridSpec grid_from_config(const Config& c, const std::string& prefix) {
  const auto y1 = c.nums(prefix + ".y1", 2);
  const auto y2 = c.nums(prefix + ".y2", 2);
  return GridSpec::make(y1[0], y1[1], y2[0], y2[1], c.num(prefix + ".step"));
}

Bba bba_from_config(const Config& c, const std::string& key) {
  const auto v = c.nums(key, 3);
  const Bba b{v[0], v[1], v[2]};
  try {
    validate_bba(b);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("config key '" + key + "': " + e.what());
  }
  return b;
}

AdaptParams adapt_from_config(const Config& c) {
  AdaptParams a;
  a.mu_ini = c.num("dsaf.mu_ini");
  a.mu_min = c.num("adapt.mu_min");
  a.p_th = c.num("adapt.p_th");
  a.alpha = c.num("adapt.alpha");
  a.beta = c.num("adapt.beta");
  a.gamma = c.num("adapt.gamma");
  a.k_u = c.count("adapt.k_u");
  a.validate();
  return a;
}

GprKernel kernel_from_config(const Config& c) {
  GprKernel k;
  k.signal_var = c.num("gpr.signal_var");
  k.lengthscale = c.num("gpr.lengthscale");
  k.noise_var = c.num("gpr.noise_var");
  k.prior_mean = c.num("gpr.prior_mean");
  k.validate();
  return k;
}

RandomPolicyConfig policy_from_config(const Config& c) {
  RandomPolicyConfig p;
  p.amplitude = c.num("episode.policy_amplitude");
  p.hold_steps = c.count("episode.policy_hold_steps");
  p.validate();
  return p;
}

}  // namespace saferep
