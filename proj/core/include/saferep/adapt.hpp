#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "saferep/data.hpp"
#include "saferep/dsaf.hpp"
#include "saferep/dynamics.hpp"
#include "saferep/statemap.hpp"

namespace saferep {

struct AdaptParams {
  double mu_ini = 0.4;
  double mu_min = 0.1;
  double p_th = 0.3;
  double alpha = 3e5;
  double beta = 0.3;
  double gamma = 0.4;
  std::size_t k_u = 20;

  void validate() const;
};

/// mu rises from mu_min at p_std = 0 to mu_ini at p_std = p_th, exponentially
/// in alpha.
double mu_schedule(double p_std, const AdaptParams& params);

/// Training-record BBA given the agreement prediction at its state.
Bba updated_training_bba(int sim_label, double p_mean, double p_std, const AdaptParams& params);

/// Sim/real agreement observation: p = 1 when both plants give the same label.
struct AgreementSample {
  SystemState x;
  double p = 0.0;
};

using LabelFn = std::function<int(const SystemState&)>;

std::vector<AgreementSample> agreement_samples(const Dataset& feedback, const LabelFn& nominal_label);

struct GprKernel {
  double signal_var = 0.25;
  double lengthscale = 2.0;
  double noise_var = 0.01;
  double prior_mean = 0.5;

  void validate() const;
};

/// Per-component affine map to zero mean and unit spread; zero spreads are
/// replaced by 1.
struct Standardizer {
  std::array<double, SystemState::kDim> mean{};
  std::array<double, SystemState::kDim> scale{};

  static Standardizer identity();
  static Standardizer fit(std::span<const SystemState> xs);
  Eigen::VectorXd apply(const SystemState& x) const;
};

struct GprModel {
  GprKernel kernel;
  Standardizer standardizer;
  Eigen::MatrixXd inputs;  // d x n, standardized
  Eigen::VectorXd targets;
  Eigen::LLT<Eigen::MatrixXd> factor;
  Eigen::VectorXd weights;  // (K + noise I)^-1 (targets - prior_mean)
  double jitter = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
};

struct GprPrediction {
  double mean = 0.0;  // clamped to [0, 1]
  double std = 0.0;
};

GprModel gpr_fit(std::span<const AgreementSample> samples, const GprKernel& kernel, const Standardizer& standardizer);
GprPrediction gpr_predict(const GprModel& model, const SystemState& x);

/// Recomputes every training BBA from its initial value and the current GPR.
/// Without a model all records keep the initial BBA.
std::vector<Bba> update_training_bbas(const Dataset& train, const GprModel* model, const AdaptParams& params);

/// Count-based BBA of a cell holding k_safe / k_unsafe feedback records.
Bba feedback_bba(std::size_t k_safe, std::size_t k_unsafe, const AdaptParams& params);

DsafGrid feedback_dsaf(std::span<const int> labels, std::span<const std::optional<CellIndex>> cells,
                       const GridSpec& spec, const AdaptParams& params, double p_t);

/// Cell-wise WBF of prior and feedback where feedback is non-empty.
DsafGrid fuse_dsafs(const DsafGrid& prior, const DsafGrid& feedback);

/// Static inputs of the adaptation loop.
struct AdaptContext {
  AdaptParams params;
  GprKernel kernel;
  GridSpec grid;
  std::size_t k_min = 3;
  Bba b_ini{0.05, 0.55, 0.4};
  double p_t = 0.6;
  SafetyFeatureMap map;
  /// Labels a state under the nominal plant.
  LabelFn nominal_label;
  /// When set the prior is this grid and never changes (physical baseline).
  std::optional<DsafGrid> fixed_prior;
};

struct AdaptationState {
  Dataset train;
  std::vector<std::optional<CellIndex>> train_cells;
  Standardizer standardizer;
  Dataset feedback;
  std::vector<std::optional<CellIndex>> feedback_cells;
  std::vector<AgreementSample> samples;
  std::optional<GprModel> gpr;
  std::vector<Bba> training_bbas;
  DsafGrid prior;
  DsafGrid feedback_grid;
  DsafGrid live;
  std::size_t iteration = 0;
};

/// N = 0: prior from the initial training BBAs, empty feedback, live = prior.
AdaptationState init_adaptation(const Dataset& train, const AdaptContext& ctx);

/// Appends exactly k_u feedback records and rebuilds GPR, training BBAs,
/// prior, feedback and live grids.
void adaptation_step(AdaptationState& state, const AdaptContext& ctx, std::span<const RecoveryRecord> batch);

/// Conservative baseline grid: `inner` on cells whose centre lies within
/// `half_width` of the origin in both coordinates, `outer` elsewhere.
DsafGrid centered_box_grid(const GridSpec& spec, double half_width, const Bba& inner, const Bba& outer, double p_t);

}  // namespace saferep
