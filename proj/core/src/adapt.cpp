#include "saferep/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "parallel.hpp"

namespace saferep {

void AdaptParams::validate() const {
  if (!(mu_min > 0.0 && mu_min < mu_ini && mu_ini < 1.0)) {
    throw std::invalid_argument("adapt: need 0 < mu_min < mu_ini < 1");
  }
  if (!(p_th > 0.0 && p_th < 1.0)) throw std::invalid_argument("adapt: p_th must be in (0, 1)");
  if (!(alpha > 1.0) || !std::isfinite(alpha)) throw std::invalid_argument("adapt: alpha must be > 1");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("adapt: beta must be in (0, 1)");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("adapt: gamma must be > 0");
  if (k_u < 1) throw std::invalid_argument("adapt: k_u must be >= 1");
}

double mu_schedule(double p_std, const AdaptParams& params) {
  // expm1 keeps the endpoints exact: p_std = 0 gives mu_min, p_std = p_th gives mu_ini.
  if (p_std == params.p_th) return params.mu_ini;
  const double la = std::log(params.alpha);
  return (params.mu_ini - params.mu_min) / std::expm1(params.p_th * la) * std::expm1(p_std * la) + params.mu_min;
}

Bba updated_training_bba(int sim_label, double p_mean, double p_std, const AdaptParams& params) {
  const double mu = mu_schedule(p_std, params);
  const double agree = (1.0 - mu) * p_mean;
  const double disagree = (1.0 - mu) * (1.0 - p_mean);
  return sim_label == 1 ? Bba{agree, disagree, mu} : Bba{disagree, agree, mu};
}

std::vector<AgreementSample> agreement_samples(const Dataset& feedback, const LabelFn& nominal_label) {
  std::vector<AgreementSample> out(feedback.k());
  detail::parallel_for(feedback.k(), [&](std::size_t i) {
    const auto& r = feedback.records[i];
    out[i] = {r.x0, nominal_label(r.x0) == r.label ? 1.0 : 0.0};
  }, /*dynamic=*/true);
  return out;
}

void GprKernel::validate() const {
  if (!(signal_var > 0.0) || !(lengthscale > 0.0) || !(noise_var >= 0.0) || !std::isfinite(prior_mean)) {
    throw std::invalid_argument("gpr: kernel needs signal_var > 0, lengthscale > 0, noise_var >= 0");
  }
}

Standardizer Standardizer::identity() {
  Standardizer s;
  s.scale.fill(1.0);
  return s;
}

Standardizer Standardizer::fit(std::span<const SystemState> xs) {
  if (xs.empty()) throw std::invalid_argument("standardizer: no samples");
  Standardizer s;
  const auto n = static_cast<double>(xs.size());
  for (std::size_t d = 0; d < SystemState::kDim; ++d) {
    double mean = 0.0;
    for (const auto& x : xs) mean += x[d];
    mean /= n;
    double var = 0.0;
    for (const auto& x : xs) var += (x[d] - mean) * (x[d] - mean);
    const double sd = std::sqrt(var / n);
    s.mean[d] = mean;
    s.scale[d] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Eigen::VectorXd Standardizer::apply(const SystemState& x) const {
  Eigen::VectorXd z(SystemState::kDim);
  for (std::size_t d = 0; d < SystemState::kDim; ++d) z[static_cast<Eigen::Index>(d)] = (x[d] - mean[d]) / scale[d];
  return z;
}

namespace {

double se_kernel(const GprKernel& k, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return k.signal_var * std::exp(-0.5 * (a - b).squaredNorm() / (k.lengthscale * k.lengthscale));
}

}  // namespace

GprModel gpr_fit(std::span<const AgreementSample> samples, const GprKernel& kernel, const Standardizer& standardizer) {
  kernel.validate();
  if (samples.empty()) throw std::invalid_argument("gpr: need at least one sample");
  const auto n = static_cast<Eigen::Index>(samples.size());
  GprModel m;
  m.kernel = kernel;
  m.standardizer = standardizer;
  m.inputs.resize(SystemState::kDim, n);
  m.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (!s.x.is_finite()) throw std::invalid_argument("gpr: non-finite input");
    if (s.p != 0.0 && s.p != 1.0) throw std::invalid_argument("gpr: targets must be 0 or 1");
    m.inputs.col(i) = standardizer.apply(s.x);
    m.targets[i] = s.p;
  }
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      K(i, j) = K(j, i) = se_kernel(kernel, m.inputs.col(i), m.inputs.col(j));
    }
  }
  K.diagonal().array() += kernel.noise_var;

  const double jitters[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  bool ok = false;
  for (double jitter : jitters) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter;
    m.factor.compute(Kj);
    if (m.factor.info() == Eigen::Success) {
      m.jitter = jitter;
      ok = true;
      break;
    }
  }
  if (!ok) throw std::runtime_error("gpr: kernel matrix not positive definite after jitter 1e-6");
  m.weights = m.factor.solve((m.targets.array() - kernel.prior_mean).matrix());
  return m;
}

GprPrediction gpr_predict(const GprModel& model, const SystemState& x) {
  const Eigen::VectorXd z = model.standardizer.apply(x);
  const auto n = model.inputs.cols();
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) ks[i] = se_kernel(model.kernel, z, model.inputs.col(i));
  const double mean = model.kernel.prior_mean + ks.dot(model.weights);
  const Eigen::VectorXd v = model.factor.matrixL().solve(ks);
  const double var = model.kernel.signal_var - v.squaredNorm();
  return {std::clamp(mean, 0.0, 1.0), std::sqrt(std::max(var, 0.0))};
}

std::vector<Bba> update_training_bbas(const Dataset& train, const GprModel* model, const AdaptParams& params) {
  params.validate();
  const auto labels = train.labels();
  std::vector<Bba> out = init_training_bbas(labels, params.mu_ini);
  if (model == nullptr) return out;
  detail::parallel_for(train.k(), [&](std::size_t i) {
    const auto pred = gpr_predict(*model, train.records[i].x0);
    if (pred.std <= params.p_th) out[i] = updated_training_bba(labels[i], pred.mean, pred.std, params);
  });
  return out;
}

Bba feedback_bba(std::size_t k_safe, std::size_t k_unsafe, const AdaptParams& params) {
  const std::size_t k = k_safe + k_unsafe;
  if (k == 0) return kEmptyBba;
  const double mu = params.beta * std::exp(-params.gamma * static_cast<double>(k - 1));
  const double kd = static_cast<double>(k);
  return {static_cast<double>(k_safe) / kd * (1.0 - mu), static_cast<double>(k_unsafe) / kd * (1.0 - mu), mu};
}

DsafGrid feedback_dsaf(std::span<const int> labels, std::span<const std::optional<CellIndex>> cells,
                       const GridSpec& spec, const AdaptParams& params, double p_t) {
  if (labels.size() != cells.size()) throw std::invalid_argument("feedback_dsaf: label and cell counts differ");
  DsafGrid grid(spec, kEmptyBba, p_t);
  std::vector<std::size_t> safe(spec.cell_count(), 0), unsafe(spec.cell_count(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!cells[i]) continue;
    (labels[i] == 1 ? safe : unsafe)[grid.offset(*cells[i])] += 1;
  }
  for (std::size_t c = 0; c < grid.cells.size(); ++c) grid.cells[c] = feedback_bba(safe[c], unsafe[c], params);
  return grid;
}

DsafGrid fuse_dsafs(const DsafGrid& prior, const DsafGrid& feedback) {
  if (!(prior.spec == feedback.spec)) throw std::invalid_argument("fuse_dsafs: grid specs differ");
  DsafGrid live = prior;
  for (std::size_t c = 0; c < live.cells.size(); ++c) {
    if (feedback.cells[c] == kEmptyBba) continue;
    const Bba pair[2] = {prior.cells[c], feedback.cells[c]};
    live.cells[c] = wbf_fuse(pair);
  }
  return live;
}

namespace {

std::vector<std::optional<CellIndex>> locate_all(const GridSpec& spec, const SafetyFeatureMap& map,
                                                 std::span<const SystemState> xs) {
  const auto ys = apply_feature_map(map, xs);
  std::vector<std::optional<CellIndex>> out;
  out.reserve(ys.size());
  for (const auto& y : ys) out.push_back(locate(spec, y));
  return out;
}

void rebuild_grids(AdaptationState& s, const AdaptContext& ctx) {
  if (ctx.fixed_prior) {
    s.prior = *ctx.fixed_prior;
  } else {
    s.training_bbas = update_training_bbas(s.train, s.gpr ? &*s.gpr : nullptr, ctx.params);
    s.prior = prior_dsaf(s.training_bbas, s.train_cells, ctx.grid, ctx.k_min, ctx.b_ini, ctx.p_t);
  }
  s.feedback_grid = feedback_dsaf(s.feedback.labels(), s.feedback_cells, s.prior.spec, ctx.params, ctx.p_t);
  s.live = fuse_dsafs(s.prior, s.feedback_grid);
}

}  // namespace

AdaptationState init_adaptation(const Dataset& train, const AdaptContext& ctx) {
  ctx.params.validate();
  ctx.kernel.validate();
  AdaptationState s;
  s.train = train;
  if (ctx.fixed_prior) {
    ctx.fixed_prior->validate();
  } else {
    if (train.k() == 0) throw std::invalid_argument("adapt: empty training dataset");
    const auto states = train.initial_states();
    s.train_cells = locate_all(ctx.grid, ctx.map, states);
    s.standardizer = Standardizer::fit(states);
  }
  if (train.k() == 0) s.standardizer = Standardizer::identity();
  s.feedback.meta = train.meta;
  rebuild_grids(s, ctx);
  return s;
}

void adaptation_step(AdaptationState& s, const AdaptContext& ctx, std::span<const RecoveryRecord> batch) {
  if (batch.size() != ctx.params.k_u) {
    throw std::invalid_argument("adaptation_step: expected " + std::to_string(ctx.params.k_u) + " feedback records, got " +
                                std::to_string(batch.size()));
  }
  Dataset fresh;
  fresh.records.assign(batch.begin(), batch.end());
  for (const auto& r : fresh.records) validate_record(r);
  const auto states = fresh.initial_states();
  const auto cells = locate_all(s.prior.spec, ctx.map, states);
  s.feedback_cells.insert(s.feedback_cells.end(), cells.begin(), cells.end());
  s.feedback.records.insert(s.feedback.records.end(), fresh.records.begin(), fresh.records.end());

  if (!ctx.fixed_prior) {
    if (!ctx.nominal_label) throw std::invalid_argument("adaptation_step: no nominal simulator");
    const auto fresh_samples = agreement_samples(fresh, ctx.nominal_label);
    s.samples.insert(s.samples.end(), fresh_samples.begin(), fresh_samples.end());
    s.gpr = gpr_fit(s.samples, ctx.kernel, s.standardizer);
  }
  rebuild_grids(s, ctx);
  ++s.iteration;
}

DsafGrid centered_box_grid(const GridSpec& spec, double half_width, const Bba& inner, const Bba& outer, double p_t) {
  validate_bba(inner);
  validate_bba(outer);
  DsafGrid grid(spec, outer, p_t);
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    const auto v = grid.index_of(c);
    const auto centre = spec.cell_center(v.row, v.col);
    if (std::abs(centre[0]) <= half_width && std::abs(centre[1]) <= half_width) grid.cells[c] = inner;
  }
  return grid;
}

}  // namespace saferep
