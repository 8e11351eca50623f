#include "saferep/trajdist.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "parallel.hpp"

namespace saferep {

static_assert(std::endian::native == std::endian::little, "distance cache assumes little-endian host");

StateWeights unit_weights() {
  StateWeights w;
  w.fill(1.0);
  return w;
}

double dtw_distance(std::span<const SystemState> a, std::span<const SystemState> b,
                    std::optional<std::size_t> band, const StateWeights& weights) {
  return dtw_generic(a.size(), b.size(), [&](std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t d = 0; d < SystemState::kDim; ++d) {
      const double diff = a[i][d] - b[j][d];
      acc += weights[d] * diff * diff;
    }
    return std::sqrt(acc);
  }, band);
}

DistanceMatrix trajectory_distances(const Dataset& ds, const DtwOptions& opts) {
  const std::size_t n = ds.k();
  std::vector<std::vector<SystemState>> trajs(n);
  for (std::size_t i = 0; i < n; ++i) {
    trajs[i] = downsample_trajectory(ds.records[i].trajectory, opts.downsample_len);
  }

  DistanceMatrix dm;
  dm.n = n;
  dm.raw.assign(n * n, 0.0);
  // Row i fills the upper triangle; rows are independent.
  detail::parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t la = trajs[i].size();
      const std::size_t lb = trajs[j].size();
      std::optional<std::size_t> band;
      if (opts.band_fraction > 0.0) {
        const auto longer = static_cast<double>(std::max(la, lb));
        const auto width = static_cast<std::size_t>(std::ceil(opts.band_fraction * longer));
        band = std::max(width, la > lb ? la - lb : lb - la);
      }
      dm.raw[i * n + j] = dtw_distance(trajs[i], trajs[j], band, opts.weights);
    }
  }, /*dynamic=*/true);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dm.raw[j * n + i] = dm.raw[i * n + j];
      dm.omega_max = std::max(dm.omega_max, dm.raw[i * n + j]);
    }
  }
  return dm;
}

void modify_distances(DistanceMatrix& dm, std::span<const int> labels, double delta) {
  if (dm.n < 2) throw std::invalid_argument("modified distances need at least 2 records");
  if (labels.size() != dm.n) throw std::invalid_argument("label count does not match distance matrix");
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be >= 0");
  double omega_max = 0.0;
  for (double v : dm.raw) omega_max = std::max(omega_max, v);
  if (!(omega_max > 0.0)) throw std::invalid_argument("degenerate dataset");
  dm.omega_max = omega_max;

  const std::size_t n = dm.n;
  dm.modified.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double v = dm.raw[i * n + j] / omega_max;
      if (labels[i] != labels[j]) v += delta;
      dm.modified[i * n + j] = v;
    }
  }
}

DistanceMatrix modified_distance_matrix(const Dataset& ds, double delta, const DtwOptions& opts) {
  if (ds.k() < 2) throw std::invalid_argument("modified distances need at least 2 records");
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be >= 0");
  DistanceMatrix dm = trajectory_distances(ds, opts);
  const auto labels = ds.labels();
  modify_distances(dm, labels, delta);
  return dm;
}

void write_distance_cache(const DistanceMatrix& dm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  const std::uint64_t n = dm.n;
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(dm.raw.data()),
            static_cast<std::streamsize>(dm.raw.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

DistanceMatrix read_distance_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in) throw std::runtime_error(path.string() + ": truncated distance cache header");
  const auto file_size = std::filesystem::file_size(path);
  if (file_size != sizeof n + n * n * sizeof(double)) {
    throw std::runtime_error(path.string() + ": distance cache size does not match n = " + std::to_string(n));
  }
  DistanceMatrix dm;
  dm.n = static_cast<std::size_t>(n);
  dm.raw.resize(dm.n * dm.n);
  in.read(reinterpret_cast<char*>(dm.raw.data()), static_cast<std::streamsize>(dm.raw.size() * sizeof(double)));
  if (!in) throw std::runtime_error(path.string() + ": truncated distance cache");
  for (double v : dm.raw) dm.omega_max = std::max(dm.omega_max, v);
  return dm;
}

}  // namespace saferep
