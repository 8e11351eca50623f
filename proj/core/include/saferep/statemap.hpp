#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "saferep/dynamics.hpp"

namespace saferep {

using Point2 = std::array<double, 2>;

struct MapTrainConfig {
  std::vector<std::size_t> hidden{128, 128};
  std::size_t epochs = 500;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Replace each Euler angle by (sin, cos): 15 inputs instead of 12.
  bool angle_features = false;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Fully connected ReLU network with a linear output layer, applied to
/// standardized inputs.
struct StateMapping {
  std::vector<std::size_t> layers;  // input, hidden..., output
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_std;
  bool angle_features = false;

  std::size_t input_dim() const { return layers.front(); }
  std::size_t output_dim() const { return layers.back(); }
  void validate() const;
};

/// Raw network input for a state (12 or 15 values, before standardization).
Eigen::VectorXd state_features(const SystemState& x, bool angle_features);

/// He-initialized network with identity standardization.
StateMapping init_network(const std::vector<std::size_t>& layers, std::uint64_t seed);

/// Network output for standardized inputs, one column per sample.
Eigen::MatrixXd forward(const StateMapping& m, const Eigen::MatrixXd& z);

struct NetworkGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// Mean over samples and outputs of the squared error, on standardized
/// inputs `z` (one column per sample). Fills `grad` when non-null.
double mse_loss(const StateMapping& m, const Eigen::MatrixXd& z, const Eigen::MatrixXd& targets,
                NetworkGradient* grad);

struct FitResult {
  StateMapping mapping;
  double final_train_mse = 0.0;
};

/// Mini-batch Adam on the mean squared error. `targets` is n x out, row-major.
FitResult fit_state_mapping(std::span<const SystemState> states, std::span<const double> targets,
                            std::size_t out_dim, const MapTrainConfig& cfg);

Point2 map_state(const StateMapping& m, const SystemState& x);
std::vector<Point2> map_states(const StateMapping& m, std::span<const SystemState> xs);

/// Baseline feature: the body-frame horizontal velocities (v_x, v_y).
struct PhysicalFeatureMap {
  friend bool operator==(const PhysicalFeatureMap&, const PhysicalFeatureMap&) = default;
};
Point2 physical_feature_map(const SystemState& x);

using SafetyFeatureMap = std::variant<StateMapping, PhysicalFeatureMap>;

Point2 apply_feature_map(const SafetyFeatureMap& map, const SystemState& x);
std::vector<Point2> apply_feature_map(const SafetyFeatureMap& map, std::span<const SystemState> xs);

/// Text model file; weights written with round-trip precision.
void write_feature_map(const SafetyFeatureMap& map, const std::filesystem::path& path);
SafetyFeatureMap read_feature_map(const std::filesystem::path& path);

}  // namespace saferep
