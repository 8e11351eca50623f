#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "saferep/dynamics.hpp"

namespace saferep {

struct DatasetMeta {
  std::string params_fingerprint;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

/// Training (simulated) or feedback (real) recovery records.
struct Dataset {
  std::vector<RecoveryRecord> records;
  DatasetMeta meta;

  std::size_t k() const { return records.size(); }
  std::vector<SystemState> initial_states() const;
  std::vector<int> labels() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline constexpr int kDatasetFormatVersion = 1;

/// Checks the record invariants (non-empty trajectory starting at x0,
/// binary label, finite values). Throws std::invalid_argument.
void validate_record(const RecoveryRecord& record);

/// JSON-lines file: a header object followed by one object per record.
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

/// Uniform index subsampling with indices round(i (T-1) / (L-1)); returns the
/// input unchanged when it is not longer than `target_len`.
std::vector<SystemState> downsample_trajectory(std::span<const SystemState> traj,
                                               std::size_t target_len);

std::vector<std::size_t> downsample_indices(std::size_t length, std::size_t target_len);

std::string to_string(Source source);
Source source_from_string(const std::string& text);

}  // namespace saferep
