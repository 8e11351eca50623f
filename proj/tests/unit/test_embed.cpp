#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "saferep/embed.hpp"

using namespace saferep;

namespace {

double embedded_distance(const Embedding& e, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t d = 0; d < e.dim; ++d) s += (e.coord(i, d) - e.coord(j, d)) * (e.coord(i, d) - e.coord(j, d));
  return std::sqrt(s);
}

std::vector<double> two_clusters(std::size_t n) {
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) d[i * n + j] = (i < n / 2) == (j < n / 2) ? 0.1 : 1.01;
    }
  }
  return d;
}

EmbedConfig small_config(double perplexity) {
  EmbedConfig cfg;
  cfg.perplexity = perplexity;
  cfg.learning_rate = 10.0;
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST(Perplexity, UniformRow) {
  const std::vector<double> row(7, 0.3);
  const RowCalibration c = perplexity_calibrate(row, 4.0, 1e-4);
  for (double p : c.p) EXPECT_NEAR(p, 1.0 / 7.0, 1e-15);
  EXPECT_NEAR(c.perplexity, 7.0, 1e-12);
}

TEST(Perplexity, TwoNeighbours) {
  // Entropy of the unit-bandwidth distribution, so the search must land on sigma = 1.
  const double w1 = std::exp(-0.5), w2 = std::exp(-2.0);
  const double p1 = w1 / (w1 + w2), p2 = w2 / (w1 + w2);
  const double target = std::exp(-(p1 * std::log(p1) + p2 * std::log(p2)));
  const std::vector<double> row{1.0, 2.0};
  const RowCalibration c = perplexity_calibrate(row, target, 1e-10);
  EXPECT_NEAR(c.sigma, 1.0, 1e-4);
  EXPECT_NEAR(c.p[0], 0.8176, 1e-4);
  EXPECT_NEAR(c.p[1], 0.1824, 1e-4);
}

TEST(Perplexity, HitsTargetWithinTolerance) {
  std::vector<double> row;
  for (int i = 1; i < 200; ++i) row.push_back(std::sqrt(static_cast<double>(i)) * 0.01);
  for (double target : {5.0, 40.0, 120.0}) {
    const RowCalibration c = perplexity_calibrate(row, target, 1e-4);
    EXPECT_LE(std::abs(c.perplexity - target), 1e-4 * target);
    double h = 0.0, sum = 0.0;
    for (double p : c.p) {
      sum += p;
      if (p > 0) h -= p * std::log(p);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_NEAR(std::exp(h), c.perplexity, 1e-9 * target);
  }
}

TEST(Perplexity, UnreachableTargetFailsToBracket) {
  // Two tied nearest neighbours: perplexity never drops below 2.
  const std::vector<double> row{0.1, 0.1, 1.0, 1.0};
  EXPECT_THROW(perplexity_calibrate(row, 1.5, 1e-4), std::runtime_error);
}

TEST(Perplexity, TooLargeForN) {
  EmbedConfig cfg;
  cfg.perplexity = 40.0;
  EXPECT_THROW(cfg.validate(40), std::invalid_argument);
  EXPECT_NO_THROW(cfg.validate(41));
  const auto d = two_clusters(10);
  EXPECT_THROW(tsne_embed(d, 10, cfg), std::invalid_argument);
}

TEST(JointProbabilities, SymmetricAndNormalized) {
  const std::size_t n = 12;
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::abs(static_cast<double>(i) - static_cast<double>(j)) * 0.1;
  }
  const auto p = joint_probabilities(d, n, 4.0, 1e-5);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(p[i * n + i], 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_DOUBLE_EQ(p[i * n + j], p[j * n + i]);
      sum += p[i * n + j];
    }
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Tsne, EquilateralTriangle) {
  const std::vector<double> d{0, 1, 1, 1, 0, 1, 1, 1, 0};
  const Embedding e = tsne_embed(d, 3, small_config(2.0));
  const double a = embedded_distance(e, 0, 1), b = embedded_distance(e, 0, 2), c = embedded_distance(e, 1, 2);
  const double lo = std::min({a, b, c}), hi = std::max({a, b, c});
  EXPECT_LE(hi, 1.05 * lo);
}

TEST(Tsne, SeparatesClusters) {
  const std::size_t n = 20;
  const auto d = two_clusters(n);
  // Nine tied nearest neighbours put the reachable perplexity in [9, 19].
  const Embedding e = tsne_embed(d, n, small_config(12.0));
  double max_within = 0.0, min_across = 1e300;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = embedded_distance(e, i, j);
      if ((i < n / 2) == (j < n / 2)) {
        max_within = std::max(max_within, dist);
      } else {
        min_across = std::min(min_across, dist);
      }
    }
  }
  EXPECT_GT(min_across, max_within);
}

TEST(Tsne, DeterministicAndKlDecreases) {
  const std::size_t n = 30;
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::abs(std::sin(0.7 * i) - std::sin(0.7 * j)) + (i != j ? 0.05 : 0.0);
  }
  EmbedConfig cfg = small_config(8.0);
  cfg.track_kl = true;
  const Embedding a = tsne_embed(d, n, cfg);
  const Embedding b = tsne_embed(d, n, cfg);
  EXPECT_EQ(a.points, b.points);
  ASSERT_EQ(a.kl_history.size(), cfg.iters);
  // Compare averages over windows after the exaggeration phase.
  auto window = [&](std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < from + 50; ++i) s += a.kl_history[i];
    return s / 50.0;
  };
  EXPECT_LT(window(cfg.iters - 50), window(cfg.exaggeration_iters));
  for (double v : a.points) EXPECT_TRUE(std::isfinite(v));
}

TEST(Tsne, DivergenceReported) {
  const auto d = two_clusters(20);
  EmbedConfig cfg = small_config(12.0);
  cfg.learning_rate = 1e308;
  try {
    tsne_embed(d, 20, cfg);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "embedding diverged (reduce learning rate)");
  }
}

TEST(Kl, Examples) {
  const std::vector<double> p{0.75, 0.25}, q{0.5, 0.5};
  EXPECT_EQ(kl_divergence(p, p), 0.0);
  EXPECT_NEAR(kl_divergence(p, q), 0.75 * std::log(1.5) + 0.25 * std::log(0.5), 1e-15);
  EXPECT_NEAR(kl_divergence(p, q), 0.1308, 1e-4);
  const std::vector<double> zero{1.0, 0.0};
  EXPECT_THROW(kl_divergence(p, zero), std::invalid_argument);
  EXPECT_NEAR(kl_divergence(zero, p), std::log(4.0 / 3.0), 1e-15);
}

TEST(EmbeddingFile, RoundTrip) {
  const auto d = two_clusters(20);
  const Embedding e = tsne_embed(d, 20, small_config(12.0));
  std::vector<int> labels(20);
  for (int i = 0; i < 20; ++i) labels[i] = i < 10;
  const auto path = std::filesystem::temp_directory_path() / "saferep_test_embedding.txt";
  write_embedding(e, labels, path);
  const LabelledEmbedding back = read_embedding(path);
  EXPECT_EQ(back.labels, labels);
  EXPECT_EQ(back.embedding.points, e.points);
  EXPECT_EQ(back.embedding.final_kl, e.final_kl);
}
