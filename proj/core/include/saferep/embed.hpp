#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace saferep {

struct EmbedConfig {
  double perplexity = 40.0;
  double search_tol = 1e-4;
  std::size_t out_dim = 2;
  std::size_t iters = 1000;
  double exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double learning_rate = 200.0;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  std::size_t momentum_switch_iter = 250;
  double init_std = 1e-4;
  std::uint64_t seed = 1;
  /// Record the (unexaggerated) KL divergence after every iteration.
  bool track_kl = false;

  void validate(std::size_t n) const;
};

struct Embedding {
  std::size_t n = 0;
  std::size_t dim = 2;
  std::vector<double> points;  // n x dim, row-major
  double final_kl = 0.0;
  std::vector<double> kl_history;

  double coord(std::size_t i, std::size_t d) const { return points[i * dim + d]; }
};

struct RowCalibration {
  double sigma = 0.0;
  std::vector<double> p;  // conditional p_{j|i} over the given neighbours
  double perplexity = 0.0;
};

/// Binary search for the Gaussian bandwidth whose conditional distribution
/// over `distances` reaches the requested perplexity within tol * perplexity.
RowCalibration perplexity_calibrate(std::span<const double> distances, double perplexity, double tol);

/// Symmetrized joint probabilities p_ij = (p_{j|i} + p_{i|j}) / 2n from an
/// n x n distance matrix (diagonal ignored).
std::vector<double> joint_probabilities(std::span<const double> distances, std::size_t n,
                                        double perplexity, double tol);

/// Exact-gradient t-SNE on a precomputed distance matrix.
Embedding tsne_embed(std::span<const double> distances, std::size_t n, const EmbedConfig& cfg);

/// Student-t joint distribution of an embedding (diagonal zero).
std::vector<double> student_t_joint(const Embedding& e);

/// sum p log(p / q), natural log, 0 log 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Text export: one line per record "index label y1 y2".
void write_embedding(const Embedding& e, std::span<const int> labels, const std::filesystem::path& path);

struct LabelledEmbedding {
  Embedding embedding;
  std::vector<int> labels;
};
LabelledEmbedding read_embedding(const std::filesystem::path& path);

}  // namespace saferep
