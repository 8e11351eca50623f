#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "saferep/trajdist.hpp"

using namespace saferep;

namespace {

std::vector<SystemState> random_traj(std::mt19937_64& rng, std::size_t len) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<SystemState> t(len);
  for (auto& s : t) {
    for (auto& v : s.x) v = g(rng);
  }
  return t;
}

Dataset toy_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    RecoveryRecord r;
    r.trajectory = random_traj(rng, 5 + i % 7);
    r.x0 = r.trajectory.front();
    r.label = static_cast<int>(i % 2);
    ds.records.push_back(r);
  }
  return ds;
}

}  // namespace

TEST(Dtw, SelfDistanceIsZero) {
  std::mt19937_64 rng(1);
  const auto a = random_traj(rng, 17);
  EXPECT_EQ(dtw_distance(a, a), 0.0);
  EXPECT_EQ(dtw_distance(a, a, 2), 0.0);
}

TEST(Dtw, HandTable) {
  const std::vector<double> a{0, 1, 2}, b{0, 2};
  const double d = dtw_generic(3, 2, [&](std::size_t i, std::size_t j) { return std::abs(a[i] - b[j]); });
  EXPECT_EQ(d, 1.0);
}

TEST(Dtw, EqualsExhaustivePathMinimum) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> len(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_traj(rng, len(rng));
    const auto b = random_traj(rng, len(rng));
    auto cost = [&](std::size_t i, std::size_t j) {
      double s = 0.0;
      for (std::size_t d = 0; d < SystemState::kDim; ++d) s += (a[i][d] - b[j][d]) * (a[i][d] - b[j][d]);
      return std::sqrt(s);
    };
    EXPECT_EQ(dtw_distance(a, b), oracle::dtw_bruteforce(a.size(), b.size(), cost));
  }
}

TEST(Dtw, Symmetric) {
  std::mt19937_64 rng(4);
  const auto a = random_traj(rng, 9), b = random_traj(rng, 13);
  EXPECT_DOUBLE_EQ(dtw_distance(a, b), dtw_distance(b, a));
}

TEST(Dtw, BandInfeasible) {
  std::mt19937_64 rng(2);
  const auto a = random_traj(rng, 10), b = random_traj(rng, 4);
  EXPECT_THROW(dtw_distance(a, b, 5), std::invalid_argument);
  EXPECT_NO_THROW(dtw_distance(a, b, 6));
}

TEST(Dtw, BandNeverBeatsUnbanded) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_traj(rng, 30), b = random_traj(rng, 30);
    EXPECT_GE(dtw_distance(a, b, 3), dtw_distance(a, b));
  }
}

TEST(ModifiedDistance, Examples) {
  DistanceMatrix dm;
  dm.n = 3;
  dm.raw = {0, 4, 0, 4, 0, 2, 0, 2, 0};
  modify_distances(dm, std::vector<int>{1, 1, 0}, 0.01);
  EXPECT_EQ(dm.at(0, 1), 1.0);
  EXPECT_EQ(dm.at(0, 2), 0.01);
  EXPECT_EQ(dm.at(1, 2), 0.5 + 0.01);

  modify_distances(dm, std::vector<int>{1, 0, 0}, 0.01);
  EXPECT_EQ(dm.at(0, 1), 1.01);

  DistanceMatrix flat;
  flat.n = 2;
  flat.raw = {0, 0, 0, 0};
  try {
    modify_distances(flat, std::vector<int>{1, 1}, 0.01);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "degenerate dataset");
  }
}

TEST(ModifiedDistance, RangeAndLabelPerturbation) {
  const Dataset ds = toy_dataset(12, 9);
  DtwOptions opts;
  opts.band_fraction = 0.0;
  DistanceMatrix dm = modified_distance_matrix(ds, 0.01, opts);
  for (std::size_t i = 0; i < dm.n; ++i) {
    for (std::size_t j = 0; j < dm.n; ++j) {
      if (i == j) continue;
      EXPECT_GE(dm.at(i, j), 0.0);
      EXPECT_LE(dm.at(i, j), 1.01);
    }
  }

  auto labels = ds.labels();
  DistanceMatrix flipped = dm;
  labels[4] = 1 - labels[4];
  modify_distances(flipped, labels, 0.01);
  for (std::size_t i = 0; i < dm.n; ++i) {
    for (std::size_t j = 0; j < dm.n; ++j) {
      const double diff = flipped.at(i, j) - dm.at(i, j);
      if (i == j) continue;
      if (i == 4 || j == 4) {
        EXPECT_NEAR(std::abs(diff), 0.01, 1e-15);
      } else {
        EXPECT_EQ(diff, 0.0);
      }
    }
  }
}

TEST(ModifiedDistance, WidensBandPerPair) {
  Dataset ds = toy_dataset(4, 2);
  ds.records[0].trajectory.resize(2);
  DtwOptions opts;
  opts.band_fraction = 0.1;
  EXPECT_NO_THROW(trajectory_distances(ds, opts));
}

TEST(DistanceCache, RoundTrip) {
  const Dataset ds = toy_dataset(6, 3);
  DtwOptions opts;
  const DistanceMatrix dm = trajectory_distances(ds, opts);
  const auto path = std::filesystem::temp_directory_path() / "saferep_test_cache.bin";
  write_distance_cache(dm, path);
  const DistanceMatrix back = read_distance_cache(path);
  EXPECT_EQ(back.n, dm.n);
  EXPECT_EQ(back.raw, dm.raw);
  EXPECT_EQ(back.omega_max, dm.omega_max);
  std::filesystem::resize_file(path, 20);
  EXPECT_THROW(read_distance_cache(path), std::runtime_error);
  std::filesystem::remove(path);
}
