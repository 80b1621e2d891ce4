#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "splatdrop/checkpoint.hpp"
#include "splatdrop/ess.hpp"
#include "splatdrop/image_io.hpp"
#include "splatdrop/parallel.hpp"
#include "splatdrop/pilot.hpp"
#include "splatdrop/ply.hpp"
#include "splatdrop/rdr.hpp"
#include "splatdrop/synthetic.hpp"
#include "splatdrop/trainer.hpp"

namespace splatdrop::cli {

namespace fs = std::filesystem;

namespace {

struct SceneArgs {
  std::string data;
  std::string synthetic;
  int views = 0;
};

struct ModelArgs {
  std::string checkpoint;
  std::string ply;
};

void add_scene_options(CLI::App* cmd, SceneArgs& s) {
  auto* data = cmd->add_option("--data", s.data, "Directory with transforms_*.json")
                   ->check(CLI::ExistingDirectory);
  cmd->add_option("--synthetic", s.synthetic, "Synthetic scene: default|soup|cuboid|<spec.json>")
      ->excludes(data);
  cmd->add_option("--views", s.views, "Keep only the first K training views")
      ->check(CLI::NonNegativeNumber);
}

void add_model_options(CLI::App* cmd, ModelArgs& m) {
  auto* ck = cmd->add_option("--checkpoint", m.checkpoint, "Training checkpoint")
                 ->check(CLI::ExistingFile);
  cmd->add_option("--ply", m.ply, "Gaussian PLY file")->check(CLI::ExistingFile)->excludes(ck);
}

Dataset load_scene(const SceneArgs& s, const Eigen::Vector3d& background) {
  Dataset ds;
  if (!s.data.empty()) {
    ds = load_blender_transforms(s.data, background);
  } else if (!s.synthetic.empty()) {
    SyntheticSceneSpec spec = SyntheticSceneSpec::parse(s.synthetic);
    spec.background = background;
    ds = generate_synthetic_scene(spec).dataset;
  } else {
    throw InputError("one of --data or --synthetic is required");
  }
  if (s.views > 0) ds.limit_train_views(s.views);
  return ds;
}

struct LoadedModel {
  GaussianCloud cloud;
  TrainConfig config;
};

LoadedModel load_model(const ModelArgs& m) {
  LoadedModel out;
  if (!m.checkpoint.empty()) {
    CheckpointData data = read_checkpoint(m.checkpoint);
    out.cloud = std::move(data.cloud);
    out.config = data.config;
  } else if (!m.ply.empty()) {
    out.cloud = ply_read(m.ply);
  } else {
    throw InputError("one of --checkpoint or --ply is required");
  }
  return out;
}

const std::vector<View>& pick_split(const Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "test") return ds.test;
  throw InputError("--split must be train or test");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

fs::path ensure_dir(const std::string& dir) {
  if (dir.empty()) throw InputError("--out is required");
  fs::create_directories(dir);
  return fs::path(dir);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void print_rows(const std::vector<MetricRow>& rows) {
  std::printf("%-6s %9s %8s %8s %10s\n", "split", "psnr", "ssim", "l1", "mse");
  for (const MetricRow& r : rows) {
    std::printf("%-6s %9.3f %8.4f %8.5f %10.3e\n", r.split.c_str(), r.psnr, r.ssim, r.l1, r.mse);
  }
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  SceneArgs scene;
  std::string out;
  std::string resume;
  std::string init_ply;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<std::string> preset;
  std::optional<std::string> precision;
  std::optional<double> rdr_rate, rdr_lambda, ess_edge, ess_scale, lambda_depth;
  std::optional<int> ess_interval, eval_interval, checkpoint_interval, init_points;
  std::optional<bool> rdr_enabled, ess_enabled, densify_enabled;
  std::vector<std::string> sets;
  std::optional<double> lpips;
  bool quiet = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Optimize a Gaussian cloud");
  cmd->add_option("--config", a.config_path, "JSON config file")->check(CLI::ExistingFile);
  add_scene_options(cmd, a.scene);
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--seed", a.seed, "Random seed");
  cmd->add_option("--iterations", a.iterations, "Training iterations");
  cmd->add_option("--preset", a.preset, "Hyperparameter preset: llff|dtu");
  cmd->add_option("--precision", a.precision, "Training precision: float32|float64");
  cmd->add_option("--rdr.rate", a.rdr_rate, "Dropout rate p");
  cmd->add_option("--rdr.lambda", a.rdr_lambda, "Weight of the dropout consistency loss");
  cmd->add_option("--rdr.enabled", a.rdr_enabled, "Enable random dropout regularization");
  cmd->add_option("--ess.edge_threshold", a.ess_edge, "Edge score threshold");
  cmd->add_option("--ess.scale_multiplier", a.ess_scale, "Scale threshold multiplier");
  cmd->add_option("--ess.interval", a.ess_interval, "Edge-guided split interval");
  cmd->add_option("--ess.enabled", a.ess_enabled, "Enable edge-guided splitting");
  cmd->add_option("--densify.enabled", a.densify_enabled, "Enable densification and pruning");
  cmd->add_option("--lambda-depth", a.lambda_depth, "Depth loss weight");
  cmd->add_option("--eval-interval", a.eval_interval, "Iterations between evaluations");
  cmd->add_option("--checkpoint-interval", a.checkpoint_interval,
                  "Iterations between checkpoints (0: final only)");
  cmd->add_option("--init-points", a.init_points, "Random initial primitive count");
  cmd->add_option("--set", a.sets, "Config override key=value (repeatable)");
  cmd->add_option("--init-ply", a.init_ply, "Initial cloud instead of random points")
      ->check(CLI::ExistingFile);
  cmd->add_option("--resume", a.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  cmd->add_option("--lpips", a.lpips, "Externally measured LPIPS, enables the AVGE column");
  cmd->add_flag("--quiet", a.quiet, "Suppress progress output");
}

TrainConfig build_config(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    try {
      cfg = TrainConfig::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("malformed config '" + a.config_path + "': " + e.what());
    }
  }
  if (a.preset) cfg.apply_preset(*a.preset);
  for (const std::string& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.iterations) cfg.iterations = *a.iterations;
  if (a.precision) cfg.precision = parse_precision(*a.precision);
  if (a.rdr_rate) cfg.rdr.rate = *a.rdr_rate;
  if (a.rdr_lambda) cfg.rdr.lambda = *a.rdr_lambda;
  if (a.rdr_enabled) cfg.rdr.enabled = *a.rdr_enabled;
  if (a.ess_edge) cfg.ess.edge_threshold = *a.ess_edge;
  if (a.ess_scale) cfg.ess.scale_multiplier = *a.ess_scale;
  if (a.ess_interval) cfg.ess.interval = *a.ess_interval;
  if (a.ess_enabled) cfg.ess.enabled = *a.ess_enabled;
  if (a.densify_enabled) cfg.densify.enabled = *a.densify_enabled;
  if (a.lambda_depth) cfg.lambda_depth = *a.lambda_depth;
  if (a.eval_interval) cfg.eval_interval = *a.eval_interval;
  if (a.checkpoint_interval) cfg.checkpoint_interval = *a.checkpoint_interval;
  if (a.init_points) cfg.init_points = *a.init_points;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a) {
  const fs::path out = ensure_dir(a.out);
  std::optional<Trainer> trainer;
  if (!a.resume.empty()) {
    const CheckpointData data = read_checkpoint(a.resume);
    trainer.emplace(Trainer::load_checkpoint(a.resume, load_scene(a.scene, data.config.background)));
  } else {
    const TrainConfig cfg = build_config(a);
    Dataset ds = load_scene(a.scene, cfg.background);
    if (!a.init_ply.empty()) {
      trainer.emplace(cfg, std::move(ds), ply_read(a.init_ply));
    } else {
      trainer.emplace(cfg, std::move(ds));
    }
  }
  Trainer& t = *trainer;
  const TrainConfig& cfg = t.config();
  write_text(out / "config.json", cfg.to_json().dump(2) + "\n");

  std::ofstream metrics(out / "metrics.csv", std::ios::binary);
  std::ofstream losses(out / "losses.csv", std::ios::binary);
  if (!metrics || !losses) throw InputError("cannot write CSV files under '" + out.string() + "'");
  metrics << metrics_csv_header() << "\n";
  losses << "iteration,view,num_gaussians,l_gs,l_depth,l_rdr,lambda_depth,lambda_rdr,total\n";

  auto run_eval = [&](int it) {
    std::vector<MetricRow> rows = evaluate(t.cloud(), t.dataset().train, cfg, it, "train", a.lpips);
    for (MetricRow& r : evaluate(t.cloud(), t.dataset().test, cfg, it, "test", a.lpips)) {
      rows.push_back(r);
    }
    for (const MetricRow& r : rows) metrics << to_csv(r) << "\n";
    if (!a.quiet) {
      std::printf("iteration %d, %zu gaussians\n", it, t.cloud().size());
      print_rows(rows);
    }
  };

  while (!t.finished()) {
    const IterationInfo info = t.step();
    const LossBreakdown& l = info.loss;
    losses << info.iteration << "," << info.view << "," << info.num_gaussians << "," << fmt(l.l_gs)
           << "," << fmt(l.l_depth) << "," << fmt(l.l_rdr) << "," << fmt(l.lambda_depth) << ","
           << fmt(l.lambda_rdr) << "," << fmt(l.total) << "\n";
    if (info.iteration % cfg.eval_interval == 0 || t.finished()) run_eval(info.iteration);
    if (cfg.checkpoint_interval > 0 && info.iteration % cfg.checkpoint_interval == 0 &&
        !t.finished()) {
      t.save_checkpoint((out / ("checkpoint_" + std::to_string(info.iteration) + ".bin")).string());
    }
  }
  t.save_checkpoint((out / "checkpoint.bin").string());
  ply_write(t.cloud(), (out / "point_cloud.ply").string());
  write_text(out / "scales.csv", histogram_csv(scale_histogram(t.cloud(), 50)));
  return 0;
}

// ---- render / eval / export ------------------------------------------------

struct RenderArgs {
  ModelArgs model;
  SceneArgs scene;
  std::string split = "test";
  std::string out;
  std::string precision = "float64";
  bool depth = false;
};

int cmd_render(const RenderArgs& a) {
  const LoadedModel m = load_model(a.model);
  const Dataset ds = load_scene(a.scene, m.config.background);
  const fs::path out = ensure_dir(a.out);
  RenderOptions opts;
  opts.precision = parse_precision(a.precision);
  opts.background = m.config.background;
  const auto& views = pick_split(ds, a.split);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const RenderOutput r = render(m.cloud, views[i].camera, {}, opts);
    const std::string stem = a.split + "_" + std::to_string(i);
    save_image((out / (stem + ".png")).string(), clamped01(r.color));
    if (a.depth) save_pfm((out / (stem + "_depth.pfm")).string(), r.depth);
  }
  return 0;
}

struct EvalArgs {
  ModelArgs model;
  SceneArgs scene;
  std::string out;
  std::optional<double> lpips;
};

int cmd_eval(const EvalArgs& a) {
  const LoadedModel m = load_model(a.model);
  const Dataset ds = load_scene(a.scene, m.config.background);
  std::vector<MetricRow> rows = evaluate(m.cloud, ds.train, m.config, 0, "train", a.lpips);
  for (MetricRow& r : evaluate(m.cloud, ds.test, m.config, 0, "test", a.lpips)) rows.push_back(r);
  print_rows(rows);
  if (!a.out.empty()) {
    std::string csv = metrics_csv_header() + "\n";
    for (const MetricRow& r : rows) csv += to_csv(r) + "\n";
    write_text(a.out, csv);
  }
  return 0;
}

struct ExportArgs {
  std::string checkpoint;
  std::string out;
};

int cmd_export(const ExportArgs& a) {
  const CheckpointData data = read_checkpoint(a.checkpoint);
  ply_write(data.cloud, a.out);
  return 0;
}

// ---- pilot -----------------------------------------------------------------

struct PilotArgs {
  std::string synthetic = "default";
  std::string config_path;
  std::vector<int> views = {3, 6, 9};
  std::vector<int> counts = {1000, 5000, 10000, 20000};
  std::vector<std::uint64_t> seeds = {0};
  int iterations = 3000;
  int log_interval = 100;
  std::string out;
};

int cmd_pilot(const PilotArgs& a) {
  const fs::path out = ensure_dir(a.out);
  TrainConfig base;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    try {
      base = TrainConfig::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("malformed config '" + a.config_path + "': " + e.what());
    }
  }
  PilotOptions opts;
  opts.iterations = a.iterations;
  opts.log_interval = a.log_interval;
  opts.seeds = a.seeds;
  const auto points =
      pilot_sweep(SyntheticSceneSpec::parse(a.synthetic), a.views, a.counts, base, opts);
  write_text(out / "pilot.csv", pilot_csv(points));
  std::string summary =
      "views,primitives,seed,best_test_iteration,best_test_loss,train_loss_at_best,final_train_loss\n";
  for (std::size_t begin = 0; begin < points.size();) {
    std::size_t end = begin;
    while (end < points.size() && points[end].views == points[begin].views &&
           points[end].primitives == points[begin].primitives &&
           points[end].seed == points[begin].seed) {
      ++end;
    }
    const std::vector<PilotPoint> curve(points.begin() + begin, points.begin() + end);
    const CurveSummary s = summarize_curve(curve);
    summary += std::to_string(curve[0].views) + "," + std::to_string(curve[0].primitives) + "," +
               std::to_string(curve[0].seed) + "," + std::to_string(s.best_test_iteration) + "," +
               fmt(s.best_test_loss) + "," + fmt(s.train_loss_at_best) + "," +
               fmt(s.final_train_loss) + "\n";
    begin = end;
  }
  write_text(out / "summary.csv", summary);
  std::cout << summary;
  return 0;
}

// ---- ensemble --------------------------------------------------------------

struct EnsembleArgs {
  ModelArgs model;
  SceneArgs scene;
  std::vector<std::size_t> k = {1, 8, 64};
  double rate = 0.3;
  std::uint64_t seed = 0;
  std::size_t view = 0;
  std::string split = "test";
  int repeats = 4;
  std::string out;
};

int cmd_ensemble(const EnsembleArgs& a) {
  const LoadedModel m = load_model(a.model);
  const Dataset ds = load_scene(a.scene, m.config.background);
  const auto& views = pick_split(ds, a.split);
  if (a.view >= views.size()) throw InputError("--view index out of range");
  if (a.repeats < 2) throw InputError("--repeats must be >= 2");
  const fs::path out = ensure_dir(a.out);
  const Camera& cam = views[a.view].camera;
  RenderOptions opts;
  opts.precision = Precision::Float64;
  opts.background = m.config.background;
  const Image full = render(m.cloud, cam, {}, opts).color;
  save_image((out / "full.png").string(), clamped01(full));
  std::string csv = "k,rate,repeats,mean_pixel_variance,mean_abs_diff_to_full\n";
  for (std::size_t k : a.k) {
    std::vector<Image> runs;
    for (int r = 0; r < a.repeats; ++r) {
      runs.push_back(ensemble_render(m.cloud, cam, k, a.rate,
                                     a.seed + static_cast<std::uint64_t>(r) * 0x9e3779b9ULL, opts));
    }
    save_image((out / ("ensemble_k" + std::to_string(k) + ".png")).string(), clamped01(runs[0]));
    double var = 0.0, diff = 0.0;
    const std::size_t n = full.data.size();
    for (std::size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      for (const Image& img : runs) mean += img.data[i];
      mean /= runs.size();
      double v = 0.0;
      for (const Image& img : runs) v += (img.data[i] - mean) * (img.data[i] - mean);
      var += v / (runs.size() - 1);
      diff += std::abs(runs[0].data[i] - full.data[i]);
    }
    csv += std::to_string(k) + "," + fmt(a.rate) + "," + std::to_string(a.repeats) + "," +
           fmt(var / n) + "," + fmt(diff / n) + "\n";
  }
  write_text(out / "variance.csv", csv);
  std::cout << csv;
  return 0;
}

// ---- edges / gradmap -------------------------------------------------------

struct EdgesArgs {
  std::string image;
  ModelArgs model;
  SceneArgs scene;
  std::string split = "train";
  std::string out;
};

int cmd_edges(const EdgesArgs& a) {
  const fs::path out = ensure_dir(a.out);
  if (!a.image.empty()) {
    save_image((out / "edges.png").string(), sobel_edge_map(load_image(a.image)));
    return 0;
  }
  const bool have_model = !a.model.checkpoint.empty() || !a.model.ply.empty();
  std::optional<LoadedModel> m;
  if (have_model) m = load_model(a.model);
  const Dataset ds = load_scene(a.scene, m ? m->config.background : Eigen::Vector3d::Zero());
  const auto& views = pick_split(ds, a.split);
  std::vector<Image> maps;
  for (std::size_t i = 0; i < views.size(); ++i) {
    maps.push_back(sobel_edge_map(views[i].image));
    save_image((out / ("edges_" + a.split + "_" + std::to_string(i) + ".png")).string(), maps.back());
  }
  if (!m) return 0;
  RenderOptions opts;
  opts.precision = Precision::Float64;
  opts.background = m->config.background;
  opts.keep_record = true;
  EdgeScoreTable table;
  std::string per_view = "primitive,view,score,coverage\n";
  for (std::size_t k = 0; k < views.size(); ++k) {
    const RenderOutput r = render(m->cloud, views[k].camera, {}, opts);
    table.views.push_back(per_view_edge_score(*r.record, maps[k]));
    const ViewEdgeScore& v = table.views.back();
    for (std::size_t i = 0; i < v.score.size(); ++i) {
      if (v.coverage[i] == 0) continue;
      per_view += std::to_string(i) + "," + std::to_string(k) + "," + fmt(v.score[i]) + "," +
                  std::to_string(v.coverage[i]) + "\n";
    }
  }
  const std::vector<double> agg = table.aggregate();
  std::string scores = "primitive,score,max_scale\n";
  for (std::size_t i = 0; i < agg.size(); ++i) {
    scores += std::to_string(i) + "," + fmt(agg[i]) + "," + fmt(m->cloud.max_scale(i)) + "\n";
  }
  write_text(out / "edge_table.csv", per_view);
  write_text(out / "edge_scores.csv", scores);
  return 0;
}

struct GradmapArgs {
  ModelArgs model;
  SceneArgs scene;
  std::string split = "train";
  std::size_t view = 0;
  double rate = 0.4;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 1;
  std::string out;
};

int cmd_gradmap(const GradmapArgs& a) {
  const LoadedModel m = load_model(a.model);
  const Dataset ds = load_scene(a.scene, m.config.background);
  const auto& views = pick_split(ds, a.split);
  if (a.view >= views.size()) throw InputError("--view index out of range");
  const fs::path out = ensure_dir(a.out);
  const View& v = views[a.view];
  RenderOptions opts;
  opts.precision = Precision::Float64;
  opts.background = m.config.background;
  opts.keep_record = true;
  const RenderOutput full = render(m.cloud, v.camera, {}, opts);
  const LossValue gs = gs_loss(full.color, v.image);
  const RenderGradients g_full = render_backward(m.cloud, v.camera, *full.record, gs.gradient);
  const DropoutMask mask = sample_mask(m.cloud.size(), a.rate, a.seed, a.iteration);
  const RenderOutput sub = sub_model_render(m.cloud, v.camera, mask, opts);
  const LossValue rdr = rdr_loss(full.color, sub.color);
  const RenderGradients g_sub = render_backward(m.cloud, v.camera, *sub.record, rdr.gradient);
  auto norms = [](const RenderGradients& g) {
    std::vector<double> n(g.mean2d.size());
    for (std::size_t i = 0; i < n.size(); ++i) n[i] = g.mean2d[i].norm();
    return n;
  };
  save_image((out / "render.png").string(), clamped01(full.color));
  save_image((out / "sub_render.png").string(), clamped01(sub.color));
  save_image((out / "gradmap_gs.png").string(), gradient_map(*full.record, norms(g_full)));
  save_image((out / "gradmap_rdr.png").string(), gradient_map(*sub.record, norms(g_sub)));
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Sparse-view Gaussian splatting with random dropout and edge-guided splitting",
               "splatdrop"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: SPLATDROP_THREADS or all cores)");

  TrainArgs train;
  add_train(app, train);

  RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render", "Render a split to PNG");
  add_model_options(render_cmd, render_args.model);
  add_scene_options(render_cmd, render_args.scene);
  render_cmd->add_option("--split", render_args.split, "train|test");
  render_cmd->add_option("--out", render_args.out, "Output directory")->required();
  render_cmd->add_option("--precision", render_args.precision, "float32|float64");
  render_cmd->add_flag("--depth", render_args.depth, "Also write PFM depth maps");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Print and write evaluation metrics");
  add_model_options(eval_cmd, eval_args.model);
  add_scene_options(eval_cmd, eval_args.scene);
  eval_cmd->add_option("--out", eval_args.out, "CSV output path");
  eval_cmd->add_option("--lpips", eval_args.lpips, "Externally measured LPIPS for AVGE");

  PilotArgs pilot;
  auto* pilot_cmd = app.add_subcommand("pilot", "Fixed-complexity sweep over views and counts");
  pilot_cmd->add_option("--synthetic", pilot.synthetic, "Synthetic scene");
  pilot_cmd->add_option("--config", pilot.config_path, "Base JSON config")->check(CLI::ExistingFile);
  pilot_cmd->add_option("--views", pilot.views, "Training view counts")->delimiter(',');
  pilot_cmd->add_option("--counts", pilot.counts, "Primitive counts")->delimiter(',');
  pilot_cmd->add_option("--seeds", pilot.seeds, "Seeds")->delimiter(',');
  pilot_cmd->add_option("--iterations", pilot.iterations, "Iterations per cell");
  pilot_cmd->add_option("--log-interval", pilot.log_interval, "Iterations between loss logs");
  pilot_cmd->add_option("--out", pilot.out, "Output directory")->required();

  EnsembleArgs ens;
  auto* ens_cmd = app.add_subcommand("ensemble", "Average of k dropout sub-model renders");
  add_model_options(ens_cmd, ens.model);
  add_scene_options(ens_cmd, ens.scene);
  ens_cmd->add_option("--k", ens.k, "Ensemble sizes")->delimiter(',');
  ens_cmd->add_option("--rate", ens.rate, "Dropout rate")->check(CLI::Range(0.0, 1.0));
  ens_cmd->add_option("--seed", ens.seed, "Mask seed");
  ens_cmd->add_option("--view", ens.view, "View index");
  ens_cmd->add_option("--split", ens.split, "train|test");
  ens_cmd->add_option("--repeats", ens.repeats, "Independent ensembles per k for the variance");
  ens_cmd->add_option("--out", ens.out, "Output directory")->required();

  EdgesArgs edges;
  auto* edges_cmd = app.add_subcommand("edges", "Sobel edge maps and per-primitive edge scores");
  edges_cmd->add_option("--image", edges.image, "Single PNG input")->check(CLI::ExistingFile);
  add_model_options(edges_cmd, edges.model);
  add_scene_options(edges_cmd, edges.scene);
  edges_cmd->add_option("--split", edges.split, "train|test");
  edges_cmd->add_option("--out", edges.out, "Output directory")->required();

  GradmapArgs grad;
  auto* grad_cmd = app.add_subcommand("gradmap", "Screen-space gradient maps of both losses");
  add_model_options(grad_cmd, grad.model);
  add_scene_options(grad_cmd, grad.scene);
  grad_cmd->add_option("--split", grad.split, "train|test");
  grad_cmd->add_option("--view", grad.view, "View index");
  grad_cmd->add_option("--rate", grad.rate, "Dropout rate")->check(CLI::Range(0.0, 1.0));
  grad_cmd->add_option("--seed", grad.seed, "Mask seed");
  grad_cmd->add_option("--iteration", grad.iteration, "Mask counter");
  grad_cmd->add_option("--out", grad.out, "Output directory")->required();

  ExportArgs exp;
  auto* exp_cmd = app.add_subcommand("export-ply", "Write a checkpoint's cloud as PLY");
  exp_cmd->add_option("--checkpoint", exp.checkpoint, "Training checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  exp_cmd->add_option("--out", exp.out, "PLY path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    set_num_threads(threads);
    if (app.got_subcommand("train")) return cmd_train(train);
    if (app.got_subcommand("render")) return cmd_render(render_args);
    if (app.got_subcommand("eval")) return cmd_eval(eval_args);
    if (app.got_subcommand("pilot")) return cmd_pilot(pilot);
    if (app.got_subcommand("ensemble")) return cmd_ensemble(ens);
    if (app.got_subcommand("edges")) return cmd_edges(edges);
    if (app.got_subcommand("gradmap")) return cmd_gradmap(grad);
    if (app.got_subcommand("export-ply")) return cmd_export(exp);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace splatdrop::cli
