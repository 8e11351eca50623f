#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "saferep/statemap.hpp"

using namespace saferep;

namespace {

std::vector<SystemState> random_states(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<SystemState> xs(n);
  for (auto& x : xs) {
    for (auto& v : x.x) v = u(rng);
  }
  return xs;
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(StateMap, GradientMatchesFiniteDifferences) {
  StateMapping m = init_network({12, 4, 4, 2}, 3);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd z(12, 7), y(2, 7);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = g(rng);
  for (auto& b : m.biases) {
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.1 * g(rng);
  }

  NetworkGradient grad;
  mse_loss(m, z, y, &grad);
  const double h = 1e-6;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = mse_loss(m, z, y, nullptr);
    param = saved - h;
    const double down = mse_loss(m, z, y, nullptr);
    param = saved;
    const double numeric = (up - down) / (2 * h);
    EXPECT_LE(std::abs(numeric - analytic), 1e-5 * std::max(1.0, std::abs(numeric)));
  };
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) check(m.weights[l].data()[i], grad.weights[l].data()[i]);
    for (Eigen::Index i = 0; i < m.biases[l].size(); ++i) check(m.biases[l][i], grad.biases[l][i]);
  }
}

TEST(StateMap, MemorizesSmallSet) {
  const auto xs = random_states(10, 1);
  std::vector<double> targets;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (std::size_t i = 0; i < 20; ++i) targets.push_back(u(rng));
  MapTrainConfig cfg;
  cfg.epochs = 3000;
  const FitResult fit = fit_state_mapping(xs, targets, 2, cfg);
  EXPECT_LT(fit.final_train_mse, 1e-3);

  // Squared error of one sample is bounded by the total over all samples.
  const double bound = std::sqrt(fit.final_train_mse * 2.0 * 10.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Point2 y = map_state(fit.mapping, xs[i]);
    EXPECT_LE(std::hypot(y[0] - targets[2 * i], y[1] - targets[2 * i + 1]), bound);
  }
}

TEST(StateMap, ConflictingTargetsGiveTheMean) {
  const SystemState x = hover_state();
  const std::vector<SystemState> xs{x, x};
  const std::vector<double> targets{0.0, 4.0, 2.0, -2.0};
  MapTrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.epochs = 4000;
  const FitResult fit = fit_state_mapping(xs, targets, 2, cfg);
  // Irreducible variance: per output the squared deviation from the mean is 1 and 9.
  EXPECT_NEAR(fit.final_train_mse, 5.0, 1e-6);
  const Point2 y = map_state(fit.mapping, x);
  EXPECT_NEAR(y[0], 1.0, 1e-3);
  EXPECT_NEAR(y[1], 1.0, 1e-3);
}

TEST(StateMap, DeterministicTraining) {
  const auto xs = random_states(60, 4);
  std::vector<double> targets(120);
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = std::sin(0.3 * static_cast<double>(i));
  MapTrainConfig cfg;
  cfg.hidden = {32, 32};
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.angle_features = true;
  const FitResult a = fit_state_mapping(xs, targets, 2, cfg);
  const FitResult b = fit_state_mapping(xs, targets, 2, cfg);
  for (std::size_t l = 0; l < a.mapping.weights.size(); ++l) {
    EXPECT_EQ(max_abs_diff(a.mapping.weights[l], b.mapping.weights[l]), 0.0);
    EXPECT_EQ(max_abs_diff(a.mapping.biases[l], b.mapping.biases[l]), 0.0);
  }
  EXPECT_EQ(a.final_train_mse, b.final_train_mse);
}

TEST(StateMap, BatchEqualsPointwise) {
  const auto xs = random_states(600, 6);
  StateMapping m = init_network({15, 8, 2}, 1);
  m.angle_features = true;
  const auto batch = map_states(m, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(batch[i], map_state(m, xs[i]));
  EXPECT_EQ(map_state(m, xs[0]), map_state(m, xs[0]));
}

TEST(StateMap, AngleFeatures) {
  SystemState x = hover_state();
  x[SystemState::kRoll] = 0.5;
  x[SystemState::kYaw] = 2 * 3.141592653589793 + 0.5;
  const Eigen::VectorXd f = state_features(x, true);
  ASSERT_EQ(f.size(), 15);
  EXPECT_EQ(state_features(x, false).size(), 12);
  EXPECT_NEAR(f[3], std::sin(0.5), 1e-15);
  EXPECT_NEAR(f[4], std::cos(0.5), 1e-15);
  EXPECT_NEAR(f[7], std::sin(0.5), 1e-12);
}

TEST(PhysicalMap, Projection) {
  EXPECT_EQ(physical_feature_map(hover_state()), (Point2{0.0, 0.0}));
  SystemState x = hover_state();
  x[SystemState::kVx] = 1.5;
  x[SystemState::kVy] = -2.0;
  x[SystemState::kVz] = 0.3;
  EXPECT_EQ(physical_feature_map(x), (Point2{1.5, -2.0}));
  EXPECT_EQ(apply_feature_map(SafetyFeatureMap{PhysicalFeatureMap{}}, x), (Point2{1.5, -2.0}));
}

TEST(FeatureMapFile, RoundTripIsExact) {
  const auto xs = random_states(40, 8);
  std::vector<double> targets(80);
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = 0.1 * static_cast<double>(i % 13);
  MapTrainConfig cfg;
  cfg.hidden = {8, 8};
  cfg.epochs = 5;
  cfg.angle_features = true;
  const SafetyFeatureMap map = fit_state_mapping(xs, targets, 2, cfg).mapping;
  const auto path = std::filesystem::temp_directory_path() / "saferep_test_mapping.txt";
  write_feature_map(map, path);
  const SafetyFeatureMap back = read_feature_map(path);
  ASSERT_TRUE(std::holds_alternative<StateMapping>(back));
  for (const auto& x : xs) EXPECT_EQ(apply_feature_map(back, x), apply_feature_map(map, x));

  write_feature_map(SafetyFeatureMap{PhysicalFeatureMap{}}, path);
  EXPECT_TRUE(std::holds_alternative<PhysicalFeatureMap>(read_feature_map(path)));
}
