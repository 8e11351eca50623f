#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "saferep/data.hpp"
#include "saferep/dynamics.hpp"

namespace saferep {

/// Symmetric1 DTW over an m x n local cost. With `band` set, cells with
/// |i - j| > band are excluded (Sakoe-Chiba window).
template <class Cost>
double dtw_generic(std::size_t m, std::size_t n, Cost&& cost, std::optional<std::size_t> band = {}) {
  if (m == 0 || n == 0) throw std::invalid_argument("dtw: trajectories must be non-empty");
  const std::size_t diff = m > n ? m - n : n - m;
  if (band && *band < diff) throw std::invalid_argument("band infeasible");

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(n + 1, inf), cur(n + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    std::fill(cur.begin(), cur.end(), inf);
    std::size_t j_lo = 1, j_hi = n;
    if (band) {
      j_lo = i > *band ? std::max<std::size_t>(1, i - *band) : 1;
      j_hi = std::min(n, i + *band);
    }
    for (std::size_t j = j_lo; j <= j_hi; ++j) {
      const double best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      cur[j] = cost(i - 1, j - 1) + best;
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

/// Euclidean local cost between states, optionally weighted per component.
using StateWeights = std::array<double, SystemState::kDim>;
StateWeights unit_weights();

double dtw_distance(std::span<const SystemState> a, std::span<const SystemState> b,
                    std::optional<std::size_t> band = {}, const StateWeights& weights = unit_weights());

struct DtwOptions {
  std::size_t downsample_len = 50;
  /// Window half-width as a fraction of the longer trajectory; <= 0 disables it.
  double band_fraction = 0.1;
  StateWeights weights = unit_weights();
};

/// Raw pairwise DTW distances and their safety-modified counterpart.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> raw;       // n x n, row-major
  double omega_max = 0.0;
  std::vector<double> modified;  // empty until modify_distances() runs

  double raw_at(std::size_t i, std::size_t j) const { return raw[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return modified[i * n + j]; }
};

/// All-pairs DTW over downsampled trajectories. The window is widened to the
/// length difference for a pair whose configured band would be infeasible.
DistanceMatrix trajectory_distances(const Dataset& ds, const DtwOptions& opts);

/// Normalizes by omega_max and adds `delta` between differently labelled
/// records.
void modify_distances(DistanceMatrix& dm, std::span<const int> labels, double delta);

DistanceMatrix modified_distance_matrix(const Dataset& ds, double delta, const DtwOptions& opts);

/// Cache format: uint64 n, then n*n float64 raw distances, little-endian.
void write_distance_cache(const DistanceMatrix& dm, const std::filesystem::path& path);
DistanceMatrix read_distance_cache(const std::filesystem::path& path);

}  // namespace saferep
