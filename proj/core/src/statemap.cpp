#include "saferep/statemap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "parallel.hpp"
#include "saferep/numeric_text.hpp"

namespace saferep {

namespace {

constexpr const char* kModelTag = "saferep-mapping";
constexpr int kModelVersion = 1;

Eigen::MatrixXd relu(const Eigen::MatrixXd& a) { return a.cwiseMax(0.0); }

Eigen::MatrixXd standardize(const StateMapping& m, std::span<const SystemState> xs) {
  Eigen::MatrixXd z(m.input_dim(), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    z.col(static_cast<Eigen::Index>(i)) =
        (state_features(xs[i], m.angle_features) - m.input_mean).cwiseQuotient(m.input_std);
  }
  return z;
}

}  // namespace

void MapTrainConfig::validate() const {
  if (hidden.empty()) throw std::invalid_argument("statemap: need at least one hidden layer");
  for (auto h : hidden) {
    if (h == 0) throw std::invalid_argument("statemap: hidden layer width must be > 0");
  }
  if (epochs == 0) throw std::invalid_argument("statemap: epochs must be > 0");
  if (batch_size == 0) throw std::invalid_argument("statemap: batch size must be > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("statemap: learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("statemap: Adam betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("statemap: epsilon must be > 0");
}

void StateMapping::validate() const {
  if (layers.size() < 2) throw std::invalid_argument("statemap: need input and output layers");
  if (weights.size() != layers.size() - 1 || biases.size() != layers.size() - 1) {
    throw std::invalid_argument("statemap: layer count mismatch");
  }
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    if (weights[l].rows() != static_cast<Eigen::Index>(layers[l + 1]) ||
        weights[l].cols() != static_cast<Eigen::Index>(layers[l]) ||
        biases[l].size() != static_cast<Eigen::Index>(layers[l + 1])) {
      throw std::invalid_argument("statemap: weight shape mismatch at layer " + std::to_string(l));
    }
  }
  const auto in = static_cast<Eigen::Index>(layers.front());
  if (input_mean.size() != in || input_std.size() != in) {
    throw std::invalid_argument("statemap: standardization size mismatch");
  }
  if ((input_std.array() <= 0.0).any()) throw std::invalid_argument("statemap: input std must be > 0");
  if (layers.front() != (angle_features ? std::size_t{15} : SystemState::kDim)) {
    throw std::invalid_argument("statemap: input width does not match the feature encoding");
  }
}

Eigen::VectorXd state_features(const SystemState& x, bool angle_features) {
  if (!angle_features) {
    Eigen::VectorXd f(SystemState::kDim);
    for (std::size_t i = 0; i < SystemState::kDim; ++i) f[static_cast<Eigen::Index>(i)] = x[i];
    return f;
  }
  Eigen::VectorXd f(15);
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < SystemState::kDim; ++i) {
    if (i >= SystemState::kRoll && i <= SystemState::kYaw) {
      f[k++] = std::sin(x[i]);
      f[k++] = std::cos(x[i]);
    } else {
      f[k++] = x[i];
    }
  }
  return f;
}

StateMapping init_network(const std::vector<std::size_t>& layers, std::uint64_t seed) {
  if (layers.size() < 2) throw std::invalid_argument("statemap: need input and output layers");
  StateMapping m;
  m.layers = layers;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const auto rows = static_cast<Eigen::Index>(layers[l + 1]);
    const auto cols = static_cast<Eigen::Index>(layers[l]);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(cols)));
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) w(r, c) = normal(rng);
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(rows));
  }
  const auto in = static_cast<Eigen::Index>(layers.front());
  m.input_mean = Eigen::VectorXd::Zero(in);
  m.input_std = Eigen::VectorXd::Ones(in);
  m.angle_features = layers.front() == 15;
  return m;
}

Eigen::MatrixXd forward(const StateMapping& m, const Eigen::MatrixXd& z) {
  Eigen::MatrixXd a = z;
  const std::size_t last = m.weights.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Eigen::MatrixXd pre = (m.weights[l] * a).colwise() + m.biases[l];
    a = l == last ? pre : relu(pre);
  }
  return a;
}

double mse_loss(const StateMapping& m, const Eigen::MatrixXd& z, const Eigen::MatrixXd& targets,
                NetworkGradient* grad) {
  const std::size_t n_layers = m.weights.size();
  std::vector<Eigen::MatrixXd> acts;  // input of each layer
  acts.reserve(n_layers + 1);
  acts.push_back(z);
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd pre = (m.weights[l] * acts.back()).colwise() + m.biases[l];
    acts.push_back(l + 1 == n_layers ? pre : relu(pre));
  }
  const Eigen::MatrixXd err = acts.back() - targets;
  const double count = static_cast<double>(err.size());
  const double loss = err.squaredNorm() / count;
  if (grad == nullptr) return loss;

  grad->weights.resize(n_layers);
  grad->biases.resize(n_layers);
  Eigen::MatrixXd delta = err * (2.0 / count);
  for (std::size_t l = n_layers; l-- > 0;) {
    grad->weights[l] = delta * acts[l].transpose();
    grad->biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = m.weights[l].transpose() * delta;
      // acts[l] is the ReLU output of layer l-1, zero exactly where inactive.
      delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

FitResult fit_state_mapping(std::span<const SystemState> states, std::span<const double> targets,
                            std::size_t out_dim, const MapTrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = states.size();
  if (n < 2) throw std::invalid_argument("statemap: need at least 2 samples");
  if (out_dim == 0 || targets.size() != n * out_dim) {
    throw std::invalid_argument("statemap: target count does not match state count");
  }

  std::vector<std::size_t> layers;
  layers.push_back(cfg.angle_features ? 15 : SystemState::kDim);
  layers.insert(layers.end(), cfg.hidden.begin(), cfg.hidden.end());
  layers.push_back(out_dim);
  StateMapping m = init_network(layers, cfg.seed);
  m.angle_features = cfg.angle_features;

  const auto in = static_cast<Eigen::Index>(layers.front());
  Eigen::MatrixXd raw(in, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) raw.col(static_cast<Eigen::Index>(i)) = state_features(states[i], cfg.angle_features);
  m.input_mean = raw.rowwise().mean();
  m.input_std.resize(in);
  for (Eigen::Index d = 0; d < in; ++d) {
    const double var = (raw.row(d).array() - m.input_mean[d]).square().mean();
    const double sd = std::sqrt(var);
    m.input_std[d] = sd > 0.0 ? sd : 1.0;
  }
  const Eigen::MatrixXd z = (raw.colwise() - m.input_mean).array().colwise() / m.input_std.array();

  Eigen::MatrixXd y(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < out_dim; ++k) {
      y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = targets[i * out_dim + k];
    }
  }
  // Start the linear output at the target mean so the early steps fit shape
  // rather than offset.
  m.biases.back() = y.rowwise().mean();

  const std::size_t n_layers = m.weights.size();
  NetworkGradient mom_w, vel_w;
  for (std::size_t l = 0; l < n_layers; ++l) {
    mom_w.weights.push_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
    mom_w.biases.push_back(Eigen::VectorXd::Zero(m.biases[l].size()));
  }
  vel_w = mom_w;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  NetworkGradient g;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const auto b = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd zb(in, b), yb(static_cast<Eigen::Index>(out_dim), b);
      for (Eigen::Index c = 0; c < b; ++c) {
        const auto idx = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(c)]);
        zb.col(c) = z.col(idx);
        yb.col(c) = y.col(idx);
      }
      const double loss = mse_loss(m, zb, yb, &g);
      if (!std::isfinite(loss)) throw std::runtime_error("training diverged");

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto adam = [&](auto& param, auto& mom, auto& vel, const auto& gr) {
        mom = cfg.beta1 * mom + (1.0 - cfg.beta1) * gr;
        vel = cfg.beta2 * vel + (1.0 - cfg.beta2) * gr.cwiseProduct(gr);
        param.array() -= cfg.learning_rate * (mom.array() / c1) / ((vel.array() / c2).sqrt() + cfg.epsilon);
      };
      for (std::size_t l = 0; l < n_layers; ++l) {
        adam(m.weights[l], mom_w.weights[l], vel_w.weights[l], g.weights[l]);
        adam(m.biases[l], mom_w.biases[l], vel_w.biases[l], g.biases[l]);
      }
    }
  }

  FitResult out;
  out.final_train_mse = mse_loss(m, z, y, nullptr);
  if (!std::isfinite(out.final_train_mse)) throw std::runtime_error("training diverged");
  out.mapping = std::move(m);
  return out;
}

Point2 map_state(const StateMapping& m, const SystemState& x) {
  const SystemState one[1] = {x};
  return map_states(m, one).front();
}

std::vector<Point2> map_states(const StateMapping& m, std::span<const SystemState> xs) {
  if (m.output_dim() != 2) throw std::invalid_argument("statemap: mapping output is not 2-D");
  std::vector<Point2> out(xs.size());
  // Columns are independent, so chunked evaluation matches one-at-a-time.
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (xs.size() + kChunk - 1) / kChunk;
  detail::parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(xs.size(), lo + kChunk);
    for (std::size_t i = lo; i < hi; ++i) {
      const Eigen::MatrixXd y = forward(m, standardize(m, xs.subspan(i, 1)));
      out[i] = {y(0, 0), y(1, 0)};
    }
  });
  return out;
}

Point2 physical_feature_map(const SystemState& x) { return {x[SystemState::kVx], x[SystemState::kVy]}; }

Point2 apply_feature_map(const SafetyFeatureMap& map, const SystemState& x) {
  if (const auto* m = std::get_if<StateMapping>(&map)) return map_state(*m, x);
  return physical_feature_map(x);
}

std::vector<Point2> apply_feature_map(const SafetyFeatureMap& map, std::span<const SystemState> xs) {
  if (const auto* m = std::get_if<StateMapping>(&map)) return map_states(*m, xs);
  std::vector<Point2> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(physical_feature_map(x));
  return out;
}

void write_feature_map(const SafetyFeatureMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << kModelTag << ' ' << kModelVersion << '\n';
  const auto* m = std::get_if<StateMapping>(&map);
  if (m == nullptr) {
    out << "kind physical\n";
  } else {
    m->validate();
    out << "kind mlp\nactivation relu\nangle_features " << (m->angle_features ? 1 : 0) << "\nlayers";
    for (auto w : m->layers) out << ' ' << w;
    out << '\n';
    auto vec = [&](const char* name, const Eigen::VectorXd& v) {
      out << name;
      for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << format_double(v[i]);
      out << '\n';
    };
    vec("mean", m->input_mean);
    vec("std", m->input_std);
    for (std::size_t l = 0; l < m->weights.size(); ++l) {
      out << "weight";
      const auto& w = m->weights[l];
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) out << ' ' << format_double(w(r, c));
      }
      out << '\n';
      vec("bias", m->biases[l]);
    }
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

SafetyFeatureMap read_feature_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> void {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  auto next = [&](const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) {
      ++line_no;
      fail("missing '" + key + "' line");
    }
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty() || tok[0] != key) fail("expected '" + key + "'");
    tok.erase(tok.begin());
    return tok;
  };
  auto numbers = [&](const std::string& key, std::size_t count) {
    const auto tok = next(key);
    if (tok.size() != count) fail("'" + key + "' expects " + std::to_string(count) + " values");
    Eigen::VectorXd v(static_cast<Eigen::Index>(count));
    try {
      for (std::size_t i = 0; i < count; ++i) v[static_cast<Eigen::Index>(i)] = parse_double(tok[i]);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    return v;
  };

  const auto head = next(kModelTag);
  if (head.size() != 1 || head[0] != std::to_string(kModelVersion)) fail("unsupported model version");
  const auto kind = next("kind");
  if (kind.size() != 1) fail("malformed 'kind'");
  if (kind[0] == "physical") return PhysicalFeatureMap{};
  if (kind[0] != "mlp") fail("unknown mapping kind '" + kind[0] + "'");

  StateMapping m;
  const auto act = next("activation");
  if (act.size() != 1 || act[0] != "relu") fail("unsupported activation");
  const auto af = next("angle_features");
  if (af.size() != 1 || (af[0] != "0" && af[0] != "1")) fail("malformed 'angle_features'");
  m.angle_features = af[0] == "1";
  try {
    for (const auto& t : next("layers")) m.layers.push_back(static_cast<std::size_t>(parse_int(t)));
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (m.layers.size() < 2) fail("need at least two layers");
  m.input_mean = numbers("mean", m.layers.front());
  m.input_std = numbers("std", m.layers.front());
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    const auto rows = static_cast<Eigen::Index>(m.layers[l + 1]);
    const auto cols = static_cast<Eigen::Index>(m.layers[l]);
    const Eigen::VectorXd flat = numbers("weight", static_cast<std::size_t>(rows * cols));
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = flat[r * cols + c];
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(numbers("bias", m.layers[l + 1]));
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  return m;
}

}  // namespace saferep
