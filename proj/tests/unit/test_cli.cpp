#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <string>

#include "export.hpp"
#include "pipeline.hpp"

using namespace saferep;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("saferep_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::set<std::string> fills(const std::string& svg, const std::string& element) {
  std::set<std::string> out;
  const std::regex re("<" + element + " [^>]*fill=\"(#[0-9a-f]{6})\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    out.insert((*it)[1]);
  }
  return out;
}

}  // namespace

TEST(Export, UniformGridIsOneColour) {
  const fs::path dir = fresh_dir("heatmap");
  const DsafGrid grid(GridSpec::make(0, 4, 0, 3, 1), {0.05, 0.55, 0.4}, 0.6);
  cli::export_heatmap(grid, dir / "a.svg", dir / "a.txt", 8);
  EXPECT_EQ(fills(slurp(dir / "a.svg"), "rect").size(), 1u);
  EXPECT_EQ(slurp(dir / "a.txt"), "0.05 0.05 0.05 0.05\n0.05 0.05 0.05 0.05\n0.05 0.05 0.05 0.05\n");
  cli::export_heatmap(grid, dir / "b.svg", dir / "b.txt", 8);
  EXPECT_EQ(slurp(dir / "a.svg"), slurp(dir / "b.svg"));
}

TEST(Export, MatrixPutsTopRowFirst) {
  const fs::path dir = fresh_dir("matrix");
  DsafGrid grid(GridSpec::make(0, 2, 0, 2, 1), {0.05, 0.55, 0.4}, 0.6);
  grid.at({2, 1}) = {0.9, 0.05, 0.05};
  cli::export_heatmap(grid, dir / "g.svg", dir / "g.txt", 4);
  EXPECT_EQ(slurp(dir / "g.txt"), "0.9 0.05\n0.05 0.05\n");
  EXPECT_EQ(cli::ramp_color(0.0), "#440154");
  EXPECT_EQ(cli::ramp_color(1.0), "#fde725");
}

TEST(Export, ScatterColoursByLabel) {
  const fs::path dir = fresh_dir("scatter");
  LabelledEmbedding le;
  le.embedding.n = 2;
  le.embedding.points = {0.0, 0.0, 1.0, 2.0};
  le.labels = {0, 1};
  cli::export_scatter(le, dir / "s.svg", dir / "s.txt");
  const std::string svg = slurp(dir / "s.svg");
  EXPECT_EQ(fills(svg, "circle").size(), 2u);
  cli::export_scatter(le, dir / "t.svg", dir / "t.txt");
  EXPECT_EQ(svg, slurp(dir / "t.svg"));
  EXPECT_EQ(slurp(dir / "s.txt"), slurp(dir / "t.txt"));
}

TEST(Pipeline, SnapshotNames) {
  EXPECT_EQ(cli::snapshot_name("live", 0), "dsaf_live_N000.txt");
  EXPECT_EQ(cli::snapshot_name("prior", 25), "dsaf_prior_N025.txt");
}

TEST(Pipeline, MissingUpstreamNamesStage) {
  cli::RunOptions opt;
  opt.out_dir = fresh_dir("missing");
  try {
    cli::distances(opt);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("generate-train"), std::string::npos) << e.what();
  }
  try {
    cli::build_prior(opt);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("run '"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, GenerateTrainIsReproducible) {
  cli::RunOptions a, b;
  a.config.set("train.k", "100");
  b.config = a.config;
  a.out_dir = fresh_dir("gen_a");
  b.out_dir = fresh_dir("gen_b");
  cli::generate_train(a);
  cli::generate_train(b);
  const Dataset ds = read_dataset(a.out_dir / cli::artifact::kTrain);
  EXPECT_EQ(ds.k(), 100u);
  EXPECT_EQ(slurp(a.out_dir / cli::artifact::kTrain), slurp(b.out_dir / cli::artifact::kTrain));
  EXPECT_TRUE(fs::exists(a.out_dir / "generate-train.manifest.json"));
}

TEST(Pipeline, SmallRunWritesSnapshots) {
  cli::RunOptions opt;
  opt.out_dir = fresh_dir("small_run");
  for (const char* kv : {"train.k=200", "map.epochs=40", "adapt.iterations=5", "grid.fit=true"}) {
    opt.config.apply_override(kv);
  }
  cli::generate_train(opt);
  cli::distances(opt);
  cli::embed(opt);
  cli::fit_map(opt, false);
  cli::build_prior(opt);
  cli::adapt(opt, std::nullopt);
  for (std::size_t n = 0; n <= 5; ++n) {
    EXPECT_TRUE(fs::exists(opt.out_dir / cli::snapshot_name("live", n))) << n;
    EXPECT_NO_THROW(read_grid(opt.out_dir / cli::snapshot_name("live", n)));
  }
  EXPECT_FALSE(fs::exists(opt.out_dir / cli::snapshot_name("live", 6)));
  cli::export_heatmap_file(opt, opt.out_dir / cli::snapshot_name("live", 5));
  EXPECT_TRUE(fs::exists(opt.out_dir / "dsaf_live_N005.svg"));
  EXPECT_TRUE(fs::exists(opt.out_dir / "dsaf_live_N005.matrix.txt"));
}
