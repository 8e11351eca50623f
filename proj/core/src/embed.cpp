#include "saferep/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "parallel.hpp"
#include "saferep/numeric_text.hpp"

namespace saferep {

namespace {

constexpr int kMaxBracketSteps = 200;
constexpr int kMaxBisections = 200;

struct RowEval {
  double perplexity;
  double entropy;
};

// p_j proportional to exp(-beta (d_j^2 - d_min^2)); returns the perplexity.
RowEval evaluate_row(std::span<const double> sq_shifted, double beta, std::vector<double>& p) {
  double z = 0.0;
  for (std::size_t j = 0; j < sq_shifted.size(); ++j) {
    p[j] = std::isfinite(sq_shifted[j]) ? std::exp(-beta * sq_shifted[j]) : 0.0;
    z += p[j];
  }
  double weighted = 0.0;
  for (std::size_t j = 0; j < sq_shifted.size(); ++j) {
    p[j] /= z;
    if (p[j] > 0.0) weighted += p[j] * sq_shifted[j];
  }
  const double h = std::log(z) + beta * weighted;
  return {std::exp(h), h};
}

}  // namespace

void EmbedConfig::validate(std::size_t n) const {
  if (n < 3) throw std::invalid_argument("embed: need at least 3 points");
  if (!(perplexity >= 2.0) || !(perplexity < static_cast<double>(n))) {
    throw std::invalid_argument("embed: perplexity must be >= 2 and < n");
  }
  if (!(search_tol > 0.0)) throw std::invalid_argument("embed: search_tol must be > 0");
  if (out_dim != 2 && out_dim != 3) throw std::invalid_argument("embed: out_dim must be 2 or 3");
  if (iters == 0) throw std::invalid_argument("embed: iters must be > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("embed: learning_rate must be > 0");
  if (!(init_std > 0.0)) throw std::invalid_argument("embed: init_std must be > 0");
}

RowCalibration perplexity_calibrate(std::span<const double> distances, double perplexity, double tol) {
  const std::size_t m = distances.size();
  if (m == 0) throw std::invalid_argument("perplexity_calibrate: empty row");
  if (!(perplexity >= 1.0) || !(perplexity < static_cast<double>(m + 1))) {
    throw std::invalid_argument("perplexity_calibrate: perplexity must be in [1, n)");
  }
  double d2_min = std::numeric_limits<double>::infinity();
  for (double d : distances) {
    if (std::isnan(d) || d < 0.0) throw std::invalid_argument("perplexity_calibrate: invalid distance");
    d2_min = std::min(d2_min, d * d);
  }
  if (!std::isfinite(d2_min)) throw std::invalid_argument("perplexity_calibrate: all distances infinite");

  std::vector<double> sq(m);
  for (std::size_t j = 0; j < m; ++j) sq[j] = distances[j] * distances[j] - d2_min;

  std::vector<double> p(m);
  auto within = [&](const RowEval& e) { return std::abs(e.perplexity - perplexity) <= tol * perplexity; };

  // Perplexity decreases monotonically in beta = 1 / (2 sigma^2).
  double beta = 1.0;
  RowEval e = evaluate_row(sq, beta, p);
  // Equidistant neighbours give perplexity m for every bandwidth.
  const bool flat = std::all_of(sq.begin(), sq.end(), [](double v) { return v == 0.0; });
  double lo = 0.0, hi = 0.0;
  if (!flat && !within(e)) {
    if (e.perplexity > perplexity) {
      lo = beta;
      int steps = 0;
      while (true) {
        beta *= 2.0;
        e = evaluate_row(sq, beta, p);
        if (within(e) || e.perplexity < perplexity) break;
        lo = beta;
        if (++steps >= kMaxBracketSteps) throw std::runtime_error("perplexity_calibrate: failed to bracket");
      }
      hi = beta;
    } else {
      hi = beta;
      int steps = 0;
      while (true) {
        beta *= 0.5;
        e = evaluate_row(sq, beta, p);
        if (within(e) || e.perplexity > perplexity) break;
        hi = beta;
        if (++steps >= kMaxBracketSteps) throw std::runtime_error("perplexity_calibrate: failed to bracket");
      }
      lo = beta;
    }
    for (int it = 0; it < kMaxBisections && !within(e); ++it) {
      beta = std::sqrt(lo * hi);
      e = evaluate_row(sq, beta, p);
      if (e.perplexity > perplexity) lo = beta; else hi = beta;
    }
    if (!within(e)) throw std::runtime_error("perplexity_calibrate: bisection did not converge");
  }
  return {std::sqrt(0.5 / beta), std::move(p), e.perplexity};
}

std::vector<double> joint_probabilities(std::span<const double> distances, std::size_t n,
                                        double perplexity, double tol) {
  if (distances.size() != n * n) throw std::invalid_argument("joint_probabilities: matrix size mismatch");
  std::vector<double> cond(n * n, 0.0);
  detail::parallel_for(n, [&](std::size_t i) {
    std::vector<double> row;
    row.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(distances[i * n + j]);
    }
    const RowCalibration cal = perplexity_calibrate(row, perplexity, tol);
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cond[i * n + j] = cal.p[k++];
    }
  });
  std::vector<double> joint(n * n, 0.0);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      joint[i * n + j] = (cond[i * n + j] + cond[j * n + i]) * scale;
    }
  }
  return joint;
}

Embedding tsne_embed(std::span<const double> distances, std::size_t n, const EmbedConfig& cfg) {
  cfg.validate(n);
  const std::vector<double> P = joint_probabilities(distances, n, cfg.perplexity, cfg.search_tol);
  const std::size_t dim = cfg.out_dim;

  double p_log_p = 0.0;
  for (double p : P) {
    if (p > 0.0) p_log_p += p * std::log(p);
  }

  Embedding e;
  e.n = n;
  e.dim = dim;
  e.points.resize(n * dim);
  {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, cfg.init_std);
    for (double& v : e.points) v = normal(rng);
  }

  std::vector<double> velocity(n * dim, 0.0), gains(n * dim, 1.0), grad(n * dim, 0.0);
  std::vector<double> attract(n * dim), repulse(n * dim), row_z(n), row_plogq(n);

  // One pass over all pairs gives the attractive and repulsive parts of the
  // gradient, the normalizer Z, and optionally sum_ij P_ij log(num_ij).
  auto sweep = [&](bool want_kl) {
    detail::parallel_for(n, [&](std::size_t i) {
      double a[3] = {0, 0, 0}, r[3] = {0, 0, 0};
      double z = 0.0, plog = 0.0;
      const double* yi = &e.points[i * dim];
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double* yj = &e.points[j * dim];
        double d2 = 0.0;
        double diff[3];
        for (std::size_t k = 0; k < dim; ++k) {
          diff[k] = yi[k] - yj[k];
          d2 += diff[k] * diff[k];
        }
        const double num = 1.0 / (1.0 + d2);
        const double pij = P[i * n + j];
        z += num;
        for (std::size_t k = 0; k < dim; ++k) {
          a[k] += pij * num * diff[k];
          r[k] += num * num * diff[k];
        }
        if (want_kl && pij > 0.0) plog += pij * std::log(num);
      }
      for (std::size_t k = 0; k < dim; ++k) {
        attract[i * dim + k] = a[k];
        repulse[i * dim + k] = r[k];
      }
      row_z[i] = z;
      row_plogq[i] = plog;
    });
    double z = 0.0, plog = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z += row_z[i];
      plog += row_plogq[i];
    }
    return std::pair{z, want_kl ? p_log_p - plog + std::log(z) : 0.0};
  };

  for (std::size_t iter = 0; iter < cfg.iters; ++iter) {
    const double exaggeration = iter < cfg.exaggeration_iters ? cfg.exaggeration : 1.0;
    const double momentum = iter < cfg.momentum_switch_iter ? cfg.momentum_initial : cfg.momentum_final;
    const auto [z, kl] = sweep(cfg.track_kl);

    for (std::size_t idx = 0; idx < n * dim; ++idx) {
      grad[idx] = 4.0 * (exaggeration * attract[idx] - repulse[idx] / z);
      if (!std::isfinite(grad[idx])) throw std::runtime_error("embedding diverged (reduce learning rate)");
    }
    for (std::size_t idx = 0; idx < n * dim; ++idx) {
      const bool same_sign = (grad[idx] > 0.0) == (velocity[idx] > 0.0);
      gains[idx] = same_sign ? gains[idx] * 0.8 : gains[idx] + 0.2;
      if (gains[idx] < 0.01) gains[idx] = 0.01;
      velocity[idx] = momentum * velocity[idx] - cfg.learning_rate * gains[idx] * grad[idx];
      e.points[idx] += velocity[idx];
    }
    for (std::size_t k = 0; k < dim; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += e.points[i * dim + k];
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) e.points[i * dim + k] -= mean;
    }
    if (cfg.track_kl) e.kl_history.push_back(kl);
  }
  // KL of the returned layout (the tracked value lags one update behind).
  e.final_kl = sweep(true).second;
  return e;
}

std::vector<double> student_t_joint(const Embedding& e) {
  const std::size_t n = e.n;
  std::vector<double> q(n * n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double d2 = 0.0;
      for (std::size_t k = 0; k < e.dim; ++k) {
        const double d = e.coord(i, k) - e.coord(j, k);
        d2 += d * d;
      }
      q[i * n + j] = 1.0 / (1.0 + d2);
      z += q[i * n + j];
    }
  }
  for (double& v : q) v /= z;
  return q;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw std::invalid_argument("kl_divergence: negative probability");
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw std::invalid_argument("kl_divergence: q = 0 where p > 0");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

void write_embedding(const Embedding& e, std::span<const int> labels, const std::filesystem::path& path) {
  if (labels.size() != e.n) throw std::invalid_argument("write_embedding: label count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "# saferep-embedding 1 n " << e.n << " dim " << e.dim << " kl " << format_double(e.final_kl) << '\n';
  for (std::size_t i = 0; i < e.n; ++i) {
    out << i << ' ' << labels[i];
    for (std::size_t k = 0; k < e.dim; ++k) out << ' ' << format_double(e.coord(i, k));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

LabelledEmbedding read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  LabelledEmbedding out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    auto fail = [&](const std::string& what) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    try {
      if (!header) {
        if (tok.size() != 9 || tok[0] != "#" || tok[1] != "saferep-embedding" || tok[2] != "1" ||
            tok[3] != "n" || tok[5] != "dim" || tok[7] != "kl") {
          fail("not a saferep embedding file");
        }
        out.embedding.n = static_cast<std::size_t>(parse_int(tok[4]));
        out.embedding.dim = static_cast<std::size_t>(parse_int(tok[6]));
        out.embedding.final_kl = parse_double(tok[8]);
        if (out.embedding.dim != 2 && out.embedding.dim != 3) fail("embedding dimension must be 2 or 3");
        header = true;
        continue;
      }
      if (tok.size() != 2 + out.embedding.dim) fail("wrong number of fields");
      if (static_cast<std::size_t>(parse_int(tok[0])) != out.labels.size()) fail("index out of sequence");
      const auto label = parse_int(tok[1]);
      if (label != 0 && label != 1) fail("label must be 0 or 1");
      out.labels.push_back(static_cast<int>(label));
      for (std::size_t k = 0; k < out.embedding.dim; ++k) out.embedding.points.push_back(parse_double(tok[2 + k]));
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  if (!header) throw std::runtime_error(path.string() + ": missing embedding header");
  if (out.labels.size() != out.embedding.n) throw std::runtime_error(path.string() + ": point count mismatch");
  return out;
}

}  // namespace saferep
