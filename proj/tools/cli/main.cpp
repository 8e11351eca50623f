#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Configuration file (replaces the built-in defaults)");
  cmd->add_option("--out", f.out, "Artifact directory")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for this stage (overrides the stage's seed key)");
  cmd->add_option("--set", f.overrides, "Override a config entry, key=value (repeatable)");
}

saferep::cli::RunOptions resolve(const CommonFlags& f) {
  saferep::cli::RunOptions opt;
  opt.config = f.config.empty() ? saferep::Config::defaults() : saferep::Config::load(f.config);
  for (const auto& o : f.overrides) opt.config.apply_override(o);
  opt.out_dir = f.out;
  opt.seed = f.seed;
  return opt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"saferep: learn and adapt a low-dimensional safe-region estimate"};
  app.require_subcommand(1);
  CommonFlags flags;
  bool physical = false;
  bool traces = false;
  std::string feedback_file, grid_file, heatmap, scatter;

  auto* gen = app.add_subcommand("generate-train", "Simulate labelled recoveries under the nominal plant");
  auto* dist = app.add_subcommand("distances", "Pairwise DTW distances between training trajectories");
  auto* emb = app.add_subcommand("embed", "Safety-modified t-SNE of the training set");
  auto* fit = app.add_subcommand("fit-map", "Fit the state mapping to the embedding");
  fit->add_flag("--physical", physical, "Use (v_x, v_y) instead of a learned mapping");
  auto* prior = app.add_subcommand("build-prior", "Grid and prior DSAF (snapshot N = 0)");
  auto* ad = app.add_subcommand("adapt", "Online adaptation with real feedback");
  ad->add_option("--feedback", feedback_file, "Use this feedback dataset instead of synthetic feedback");
  auto* ep = app.add_subcommand("episode", "Supervised random-policy episodes on the real plant");
  ep->add_option("--grid", grid_file, "Grid dump to supervise with (default: latest live snapshot)");
  ep->add_flag("--traces", traces, "Also write every episode trace as a dataset");
  auto* ex = app.add_subcommand("export", "Render a grid dump or embedding as SVG plus text");
  auto* hm = ex->add_option("--heatmap", heatmap, "Grid dump file");
  auto* sc = ex->add_option("--scatter", scatter, "Embedding file");
  hm->excludes(sc);
  for (auto* cmd : {gen, dist, emb, fit, prior, ad, ep, ex}) add_common(cmd, flags);

  CLI11_PARSE(app, argc, argv);

  auto* cmd = app.get_subcommands().front();
  const std::string stage = cmd->get_name();
  try {
    const auto opt = resolve(flags);
    namespace cli = saferep::cli;
    if (cmd == gen) cli::generate_train(opt);
    else if (cmd == dist) cli::distances(opt);
    else if (cmd == emb) cli::embed(opt);
    else if (cmd == fit) cli::fit_map(opt, physical);
    else if (cmd == prior) cli::build_prior(opt);
    else if (cmd == ad) cli::adapt(opt, feedback_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(feedback_file));
    else if (cmd == ep) cli::episode(opt, grid_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(grid_file), traces);
    else if (!heatmap.empty()) cli::export_heatmap_file(opt, heatmap);
    else if (!scatter.empty()) cli::export_scatter_file(opt, scatter);
    else throw std::runtime_error("export needs --heatmap or --scatter");
  } catch (const std::exception& e) {
    std::cerr << "saferep " << stage << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
