#include "pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <regex>
#include <stdexcept>

#include "export.hpp"
#include "json.hpp"
#include "saferep/numeric_text.hpp"

namespace saferep::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

class Manifest {
 public:
  Manifest(std::string stage, const RunOptions& opt) : stage_(std::move(stage)), opt_(opt), start_(Clock::now()) {
    doc_["stage"] = stage_;
    doc_["config_fingerprint"] = opt.config.fingerprint();
  }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void input(const std::string& name) { doc_["inputs"].push_back(name); }
  void output(const std::string& name) { doc_["outputs"].push_back(name); }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void lap(const std::string& name) {
    const auto now = Clock::now();
    doc_["timings_s"][name] = std::chrono::duration<double>(now - lap_start_).count();
    lap_start_ = now;
  }
  void write() {
    doc_["timings_s"]["total"] = std::chrono::duration<double>(Clock::now() - start_).count();
    const fs::path path = opt_.out_dir / (stage_ + ".manifest.json");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << doc_.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  }

 private:
  std::string stage_;
  const RunOptions& opt_;
  Clock::time_point start_;
  Clock::time_point lap_start_ = Clock::now();
  json doc_ = json::object();
};

fs::path require(const RunOptions& opt, const char* name, const char* producer) {
  const fs::path p = opt.out_dir / name;
  if (!fs::exists(p)) {
    throw std::runtime_error("missing upstream artifact '" + p.string() + "' (run '" + producer + "' first)");
  }
  return p;
}

void prepare_out(const RunOptions& opt) { fs::create_directories(opt.out_dir); }

std::uint64_t stage_seed(const RunOptions& opt, const std::string& key) {
  return opt.seed ? *opt.seed : opt.config.seed(key);
}

bool is_physical(const SafetyFeatureMap& map) { return std::holds_alternative<PhysicalFeatureMap>(map); }

LabelFn nominal_labeller(const Config& c) {
  return [plant = plant_from_config(c, "nominal"), gains = gains_from_config(c),
          rc = recovery_from_config(c)](const SystemState& x) {
    return simulate_recovery(x, plant, gains, rc).record.label;
  };
}

void write_snapshots(const AdaptationState& s, const RunOptions& opt, Manifest& m) {
  for (const auto& [kind, grid] : {std::pair<const char*, const DsafGrid*>{"prior", &s.prior},
                                   {"feedback", &s.feedback_grid},
                                   {"live", &s.live}}) {
    const auto name = snapshot_name(kind, s.iteration);
    write_grid(*grid, opt.out_dir / name);
    m.output(name);
  }
}

AdaptContext adapt_context(const RunOptions& opt, const SafetyFeatureMap& map, const DsafGrid& prior0) {
  const Config& c = opt.config;
  AdaptContext ctx;
  ctx.params = adapt_from_config(c);
  ctx.kernel = kernel_from_config(c);
  ctx.grid = prior0.spec;
  ctx.k_min = c.count("dsaf.k_min");
  ctx.b_ini = bba_from_config(c, "dsaf.b_ini");
  ctx.p_t = prior0.p_t;
  ctx.map = map;
  ctx.nominal_label = nominal_labeller(c);
  if (is_physical(map)) ctx.fixed_prior = prior0;
  return ctx;
}

std::optional<fs::path> latest_live_snapshot(const fs::path& dir) {
  static const std::regex pattern(R"(dsaf_live_N(\d{3,})\.txt)");
  std::optional<fs::path> best;
  long best_n = -1;
  if (!fs::exists(dir)) return best;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      const long n = std::stol(m[1].str());
      if (n > best_n) {
        best_n = n;
        best = entry.path();
      }
    }
  }
  return best;
}

}  // namespace

std::string snapshot_name(const std::string& kind, std::size_t iteration) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "dsaf_%s_N%03zu.txt", kind.c_str(), iteration);
  return buf;
}

void generate_train(const RunOptions& opt) {
  prepare_out(opt);
  const Config& c = opt.config;
  Manifest m("generate-train", opt);
  const auto seed = stage_seed(opt, "train.seed");
  m.seed(seed);
  const auto plant = plant_from_config(c, "nominal");
  const auto gains = gains_from_config(c);
  const auto rc = recovery_from_config(c);
  const Dataset ds = generate_dataset(c.count("train.k"), box_from_config(c, "training"), seed, plant, gains, rc,
                                      Source::kSim, c.count("train.store_len"));
  m.lap("simulate");
  write_dataset(ds, opt.out_dir / artifact::kTrain);
  m.output(artifact::kTrain);
  const auto labels = ds.labels();
  const auto safe = std::count(labels.begin(), labels.end(), 1);
  m.set("params_fingerprint", ds.meta.params_fingerprint);
  m.set("records", ds.k());
  m.set("safe", safe);
  m.write();
  std::cout << "generate-train: " << ds.k() << " records, " << safe << " safe\n";
}

void distances(const RunOptions& opt) {
  const auto train_path = require(opt, artifact::kTrain, "generate-train");
  Manifest m("distances", opt);
  m.input(artifact::kTrain);
  const Dataset ds = read_dataset(train_path);
  m.set("params_fingerprint", ds.meta.params_fingerprint);
  const DistanceMatrix dm = trajectory_distances(ds, dtw_from_config(opt.config));
  m.lap("dtw");
  write_distance_cache(dm, opt.out_dir / artifact::kDistances);
  m.output(artifact::kDistances);
  m.set("omega_max", dm.omega_max);
  m.write();
  std::cout << "distances: " << dm.n << " x " << dm.n << ", omega_max " << format_double(dm.omega_max) << '\n';
}

void embed(const RunOptions& opt) {
  const auto train_path = require(opt, artifact::kTrain, "generate-train");
  const auto dist_path = require(opt, artifact::kDistances, "distances");
  Manifest m("embed", opt);
  m.input(artifact::kTrain);
  m.input(artifact::kDistances);
  const Dataset ds = read_dataset(train_path);
  DistanceMatrix dm = read_distance_cache(dist_path);
  if (dm.n != ds.k()) throw std::runtime_error("distance cache holds " + std::to_string(dm.n) + " records, dataset " + std::to_string(ds.k()));
  const auto labels = ds.labels();
  modify_distances(dm, labels, opt.config.num("dtw.delta"));
  EmbedConfig cfg = embed_from_config(opt.config);
  cfg.seed = stage_seed(opt, "embed.seed");
  m.seed(cfg.seed);
  const Embedding e = tsne_embed(dm.modified, dm.n, cfg);
  m.lap("tsne");
  write_embedding(e, labels, opt.out_dir / artifact::kEmbedding);
  m.output(artifact::kEmbedding);
  m.set("final_kl", e.final_kl);
  m.write();
  std::cout << "embed: " << e.n << " points, KL " << format_double(e.final_kl) << '\n';
}

void fit_map(const RunOptions& opt, bool physical) {
  prepare_out(opt);
  Manifest m("fit-map", opt);
  if (physical) {
    write_feature_map(PhysicalFeatureMap{}, opt.out_dir / artifact::kMapping);
    m.output(artifact::kMapping);
    m.set("kind", "physical");
    m.write();
    std::cout << "fit-map: physical features (v_x, v_y)\n";
    return;
  }
  const auto train_path = require(opt, artifact::kTrain, "generate-train");
  const auto emb_path = require(opt, artifact::kEmbedding, "embed");
  m.input(artifact::kTrain);
  m.input(artifact::kEmbedding);
  const Dataset ds = read_dataset(train_path);
  const LabelledEmbedding le = read_embedding(emb_path);
  if (le.embedding.n != ds.k()) throw std::runtime_error("embedding and dataset sizes differ");
  if (le.embedding.dim != 2) throw std::runtime_error("the grid needs a 2-D embedding");
  MapTrainConfig cfg = map_from_config(opt.config);
  cfg.seed = stage_seed(opt, "map.seed");
  m.seed(cfg.seed);
  const auto states = ds.initial_states();
  const FitResult fit = fit_state_mapping(states, le.embedding.points, 2, cfg);
  m.lap("train");
  write_feature_map(fit.mapping, opt.out_dir / artifact::kMapping);
  m.output(artifact::kMapping);

  // Final realization: the training states pushed through the fitted map.
  Embedding real;
  real.n = ds.k();
  real.dim = 2;
  for (const auto& y : map_states(fit.mapping, states)) real.points.insert(real.points.end(), y.begin(), y.end());
  write_embedding(real, le.labels, opt.out_dir / artifact::kRealization);
  m.output(artifact::kRealization);
  m.set("kind", "mlp");
  m.set("final_train_mse", fit.final_train_mse);
  m.write();
  std::cout << "fit-map: final training MSE " << format_double(fit.final_train_mse) << '\n';
}

void build_prior(const RunOptions& opt) {
  const Config& c = opt.config;
  const auto map_path = require(opt, artifact::kMapping, "fit-map");
  Manifest m("build-prior", opt);
  m.input(artifact::kMapping);
  const SafetyFeatureMap map = read_feature_map(map_path);
  const double p_t = c.num("grid.p_t");

  AdaptationState state;
  if (is_physical(map)) {
    const GridSpec spec = grid_from_config(c, "baseline");
    DsafGrid prior = centered_box_grid(spec, c.num("baseline.half_width"), bba_from_config(c, "baseline.inner"),
                                       bba_from_config(c, "baseline.outer"), p_t);
    state.prior = prior;
    state.feedback_grid = DsafGrid(spec, kEmptyBba, p_t);
    state.live = prior;
  } else {
    const auto train_path = require(opt, artifact::kTrain, "generate-train");
    m.input(artifact::kTrain);
    const Dataset ds = read_dataset(train_path);
    AdaptContext ctx;
    ctx.params = adapt_from_config(c);
    ctx.kernel = kernel_from_config(c);
    ctx.k_min = c.count("dsaf.k_min");
    ctx.b_ini = bba_from_config(c, "dsaf.b_ini");
    ctx.p_t = p_t;
    ctx.map = map;
    if (c.flag("grid.fit")) {
      const auto ys = apply_feature_map(map, ds.initial_states());
      ctx.grid = fit_grid_spec(ys, c.count("grid.fit_cells"), c.num("grid.fit_quantum"));
    } else {
      ctx.grid = grid_from_config(c, "grid");
    }
    state = init_adaptation(ds, ctx);
  }
  write_snapshots(state, opt, m);
  const auto& s = state.prior.spec;
  m.set("grid", {{"y1", {s.y1_min, s.y1_max}}, {"y2", {s.y2_min, s.y2_max}}, {"step", s.step}});
  m.set("safe_cells", safe_region_cells(state.live).size());
  m.write();
  std::cout << "build-prior: " << s.n_rows << " x " << s.n_cols << " grid, step " << format_double(s.step) << ", "
            << safe_region_cells(state.live).size() << " cells above p_t\n";
}

void adapt(const RunOptions& opt, const std::optional<fs::path>& feedback_file) {
  const Config& c = opt.config;
  const auto map_path = require(opt, artifact::kMapping, "fit-map");
  const auto prior_path = require(opt, snapshot_name("prior", 0).c_str(), "build-prior");
  Manifest m("adapt", opt);
  m.input(artifact::kMapping);
  m.input(snapshot_name("prior", 0));
  const SafetyFeatureMap map = read_feature_map(map_path);
  const DsafGrid prior0 = read_grid(prior_path);
  const AdaptContext ctx = adapt_context(opt, map, prior0);

  Dataset train;
  if (!is_physical(map)) {
    train = read_dataset(require(opt, artifact::kTrain, "generate-train"));
    m.input(artifact::kTrain);
  }
  AdaptationState state = init_adaptation(train, ctx);
  if (!(state.prior == prior0)) {
    throw std::runtime_error("'" + prior_path.string() + "' does not match the current config; rerun build-prior");
  }

  const std::size_t iterations = c.count("adapt.iterations");
  const std::size_t k_u = ctx.params.k_u;
  Dataset feedback;
  if (feedback_file) {
    feedback = read_dataset(*feedback_file);
    m.input(feedback_file->string());
    if (feedback.k() < iterations * k_u) {
      throw std::runtime_error("feedback file holds " + std::to_string(feedback.k()) + " records, need " +
                               std::to_string(iterations * k_u));
    }
    feedback.records.resize(iterations * k_u);
  } else {
    const auto seed = stage_seed(opt, "adapt.seed");
    m.seed(seed);
    feedback = generate_dataset(iterations * k_u, box_from_config(c, c.str("adapt.range")), seed,
                                plant_from_config(c, "real"), gains_from_config(c), recovery_from_config(c),
                                Source::kReal, c.count("train.store_len"));
  }
  m.lap("feedback");
  write_dataset(feedback, opt.out_dir / artifact::kFeedback);
  m.output(artifact::kFeedback);

  for (std::size_t it = 0; it < iterations; ++it) {
    adaptation_step(state, ctx, std::span(feedback.records).subspan(it * k_u, k_u));
    write_snapshots(state, opt, m);
  }
  m.lap("iterations");
  m.set("iterations", iterations);
  m.set("safe_cells", safe_region_cells(state.live).size());
  m.write();
  std::cout << "adapt: " << iterations << " iterations, " << feedback.k() << " feedback records, "
            << safe_region_cells(state.live).size() << " cells above p_t\n";
}

void episode(const RunOptions& opt, const std::optional<fs::path>& grid_file, bool traces) {
  const Config& c = opt.config;
  const auto map_path = require(opt, artifact::kMapping, "fit-map");
  fs::path grid_path;
  if (grid_file) {
    grid_path = *grid_file;
  } else {
    const auto latest = latest_live_snapshot(opt.out_dir);
    if (!latest) throw std::runtime_error("no live grid snapshot in '" + opt.out_dir.string() + "' (run 'build-prior' first)");
    grid_path = *latest;
  }
  Manifest m("episode", opt);
  m.input(artifact::kMapping);
  m.input(grid_path.string());
  const SafetyFeatureMap map = read_feature_map(map_path);
  const DsafGrid grid = read_grid(grid_path);
  const auto real = plant_from_config(c, "real");
  const auto gains = gains_from_config(c);
  const auto rc = recovery_from_config(c);
  const StateBox box = box_from_config(c, c.str("episode.range"));
  const auto policy_cfg = policy_from_config(c);
  EpisodeConfig ecfg;
  ecfg.max_steps = c.count("episode.max_steps");
  const auto seed = stage_seed(opt, "episode.seed");
  m.seed(seed);

  std::mt19937_64 seeds(seed);
  Dataset fb;
  fb.meta.seed = seed;
  fb.meta.params_fingerprint = params_fingerprint(real, gains, rc);
  Dataset tr = fb;
  std::ofstream summary(opt.out_dir / artifact::kEpisodes, std::ios::binary | std::ios::trunc);
  summary << "# episode end steps switch_time recovery label\n";
  std::size_t switched = 0, recovered = 0, violations = 0;
  const std::size_t count = c.count("episode.count");
  for (std::size_t e = 0; e < count; ++e) {
    const auto x0_seed = seeds();
    const auto policy_seed = seeds();
    const SystemState x0 = sample_estimated_safe(box, x0_seed, grid, map, c.count("episode.max_draws"));
    const EpisodeResult r =
        supervise_episode(x0, random_policy(policy_seed, real, policy_cfg), grid, map, real, gains, rc, ecfg);
    for (const auto& s : r.trace) violations += s.policy_action && !(s.probability > grid.p_t);
    summary << e << ' ' << to_string(r.end) << ' ' << r.trace.size() << ' '
            << (r.switch_time ? format_double(*r.switch_time) : "-") << ' '
            << (r.recovery_outcome ? to_string(*r.recovery_outcome) : "-") << ' '
            << (r.feedback ? std::to_string(r.feedback->label) : "-") << '\n';
    if (r.feedback) {
      ++switched;
      recovered += r.feedback->label;
      fb.records.push_back(*r.feedback);
    }
    if (traces) {
      RecoveryRecord rec;
      rec.x0 = x0;
      rec.source = Source::kReal;
      rec.label = r.feedback ? r.feedback->label : (r.end == EpisodeEnd::kMaxSteps ? 1 : 0);
      for (const auto& s : r.trace) rec.trajectory.push_back(s.x);
      tr.records.push_back(std::move(rec));
    }
  }
  if (!summary) throw std::runtime_error("write failed for episodes summary");
  m.lap("episodes");
  m.output(artifact::kEpisodes);
  write_dataset(fb, opt.out_dir / artifact::kEpisodeFeedback);
  m.output(artifact::kEpisodeFeedback);
  if (traces) {
    write_dataset(tr, opt.out_dir / artifact::kEpisodeTraces);
    m.output(artifact::kEpisodeTraces);
  }
  m.set("switched", switched);
  m.set("recovered", recovered);
  m.set("violations", violations);
  m.write();
  std::cout << "episode: " << count << " episodes, " << switched << " switches, " << recovered
            << " successful recoveries, " << violations << " supervision violations\n";
}

void export_heatmap_file(const RunOptions& opt, const fs::path& grid_file) {
  prepare_out(opt);
  const DsafGrid grid = read_grid(grid_file);
  const std::string stem = grid_file.stem().string();
  const fs::path svg = opt.out_dir / (stem + ".svg");
  const fs::path matrix = opt.out_dir / (stem + ".matrix.txt");
  export_heatmap(grid, svg, matrix, static_cast<int>(opt.config.count("export.cell_px")));
  std::cout << "export: " << svg.string() << ", " << matrix.string() << '\n';
}

void export_scatter_file(const RunOptions& opt, const fs::path& embedding_file) {
  prepare_out(opt);
  const LabelledEmbedding le = read_embedding(embedding_file);
  const std::string stem = embedding_file.stem().string();
  const fs::path svg = opt.out_dir / (stem + ".svg");
  const fs::path list = opt.out_dir / (stem + ".points.txt");
  export_scatter(le, svg, list);
  std::cout << "export: " << svg.string() << ", " << list.string() << '\n';
}

}  // namespace saferep::cli
