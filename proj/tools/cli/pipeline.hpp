#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "saferep/config.hpp"

namespace saferep::cli {

namespace artifact {
inline constexpr const char* kTrain = "train.jsonl";
inline constexpr const char* kDistances = "distances.bin";
inline constexpr const char* kEmbedding = "embedding.txt";
inline constexpr const char* kMapping = "mapping.txt";
inline constexpr const char* kRealization = "realization.txt";
inline constexpr const char* kFeedback = "feedback.jsonl";
inline constexpr const char* kEpisodes = "episodes.txt";
inline constexpr const char* kEpisodeFeedback = "episode_feedback.jsonl";
inline constexpr const char* kEpisodeTraces = "episode_traces.jsonl";
}  // namespace artifact

/// "dsaf_<kind>_N###.txt", kind in {prior, feedback, live}.
std::string snapshot_name(const std::string& kind, std::size_t iteration);

struct RunOptions {
  Config config = Config::defaults();
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
};

void generate_train(const RunOptions& opt);
void distances(const RunOptions& opt);
void embed(const RunOptions& opt);
void fit_map(const RunOptions& opt, bool physical);
void build_prior(const RunOptions& opt);
/// Synthetic real feedback unless `feedback_file` names an existing dataset.
void adapt(const RunOptions& opt, const std::optional<std::filesystem::path>& feedback_file);
/// Uses `grid_file`, or the latest live snapshot in the output directory.
void episode(const RunOptions& opt, const std::optional<std::filesystem::path>& grid_file, bool traces);
void export_heatmap_file(const RunOptions& opt, const std::filesystem::path& grid_file);
void export_scatter_file(const RunOptions& opt, const std::filesystem::path& embedding_file);

}  // namespace saferep::cli
