#include "splatdrop/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "splatdrop/checkpoint.hpp"
#include "splatdrop/ess.hpp"
#include "splatdrop/rasterizer.hpp"
#include "splatdrop/rdr.hpp"

namespace splatdrop {

namespace {

GaussianCloud with_sh_degree(const GaussianCloud& in, int degree) {
  if (in.sh_degree() == degree) return in;
  GaussianCloud out(in.size(), degree, in.scene_extent);
  for (Param p : kAllParams) {
    if (p != Param::ShRest) out.params[p] = in.params[p];
  }
  const int wi = in.params.width(Param::ShRest), wo = out.params.width(Param::ShRest);
  const int w = std::min(wi, wo);
  for (std::size_t i = 0; i < in.size(); ++i) {
    std::copy_n(in.params.row(Param::ShRest, i), w, out.params.row(Param::ShRest, i));
  }
  return out;
}

void add_into(ParamBlock& acc, const ParamBlock& g) {
  for (int k = 0; k < kParamGroups; ++k) {
    auto& a = acc.groups[k];
    const auto& b = g.groups[k];
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  }
}

void scale_image(Image& img, double s) {
  for (double& v : img.data) v *= s;
}

std::vector<std::int64_t> compose(const std::vector<std::int64_t>& outer,
                                  const std::vector<std::int64_t>& inner) {
  std::vector<std::int64_t> out(outer.size());
  for (std::size_t k = 0; k < outer.size(); ++k) out[k] = outer[k] < 0 ? -1 : inner[outer[k]];
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void DensifyStats::resize(std::size_t n) {
  grad_accum.assign(n, 0.0);
  denom.assign(n, 0.0);
}

void DensifyStats::remap(std::span<const std::int64_t> source_rows) {
  std::vector<double> g(source_rows.size(), 0.0), d(source_rows.size(), 0.0);
  for (std::size_t k = 0; k < source_rows.size(); ++k) {
    if (source_rows[k] >= 0) {
      g[k] = grad_accum.at(static_cast<std::size_t>(source_rows[k]));
      d[k] = denom.at(static_cast<std::size_t>(source_rows[k]));
    }
  }
  grad_accum = std::move(g);
  denom = std::move(d);
}

void DensifyStats::reset() {
  std::fill(grad_accum.begin(), grad_accum.end(), 0.0);
  std::fill(denom.begin(), denom.end(), 0.0);
}

DensifyResult densify_and_prune(const GaussianCloud& cloud, const DensifyStats& stats,
                                const DensifyConfig& config, bool prune_big, CounterRng& rng) {
  const std::size_t n = cloud.size();
  if (stats.grad_accum.size() != n || stats.denom.size() != n) {
    throw std::invalid_argument("densify statistics do not match the cloud size");
  }
  const double size_thr = config.percent_dense * cloud.scene_extent;
  std::vector<bool> clone(n, false), split(n, false);
  DensifyResult result;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = stats.denom[i] > 0.0 ? stats.grad_accum[i] / stats.denom[i] : 0.0;
    if (!(g >= config.grad_threshold) || stats.denom[i] == 0.0) continue;
    if (cloud.max_scale(i) <= size_thr) {
      clone[i] = true;
      ++result.cloned;
    } else {
      split[i] = true;
      ++result.split;
    }
  }
  StructuralEdit cloned = clone_masked(cloud, clone);
  split.resize(cloned.cloud.size(), false);
  StructuralEdit splitted = split_masked(cloned.cloud, split, rng);
  const std::vector<std::int64_t> rows = compose(splitted.source_rows, cloned.source_rows);

  const GaussianCloud& mid = splitted.cloud;
  std::vector<bool> keep(mid.size(), true);
  for (std::size_t i = 0; i < mid.size(); ++i) {
    bool drop = mid.opacity(i) < config.prune_opacity;
    if (prune_big && mid.max_scale(i) > config.max_world_scale * mid.scene_extent) drop = true;
    if (drop) {
      keep[i] = false;
      ++result.pruned;
    }
  }
  if (result.pruned == mid.size()) {
    throw TrainingError("densify_and_prune removed every primitive (opacity threshold " +
                        fmt(config.prune_opacity) + ")");
  }
  StructuralEdit pruned = prune_edit(mid, keep);
  result.edit.cloud = std::move(pruned.cloud);
  result.edit.source_rows = compose(pruned.source_rows, rows);
  return result;
}

std::vector<MetricRow> evaluate(const GaussianCloud& cloud, const std::vector<View>& views,
                                const TrainConfig& config, int iteration, const std::string& split,
                                std::optional<double> lpips) {
  if (views.empty()) return {};
  RenderOptions opts;
  opts.precision = config.eval_precision;
  opts.background = config.background;
  MetricRow row;
  row.iteration = iteration;
  row.split = split;
  for (const View& v : views) {
    const RenderOutput out = render(cloud, v.camera, {}, opts);
    const Image img = clamped01(out.color);
    row.psnr += psnr(img, v.image);
    row.ssim += ssim(img, v.image);
    row.l1 += l1(img, v.image);
    row.mse += mse(img, v.image);
    row.l_gs += gs_loss_value(img, v.image);
    if (config.lambda_depth > 0.0 && v.depth) {
      const DepthLoss d = depth_loss(out.depth, *v.depth);
      row.l_depth += d.value;
    }
  }
  const double inv = 1.0 / static_cast<double>(views.size());
  row.psnr *= inv;
  row.ssim *= inv;
  row.l1 *= inv;
  row.mse *= inv;
  row.l_gs *= inv;
  row.l_depth *= inv;
  row.total = row.l_gs + config.lambda_depth * row.l_depth;
  row.avge = avge(row.mse, row.ssim, lpips);
  return {row};
}

std::string metrics_csv_header() {
  return "iteration,split,psnr,ssim,l1,mse,avge,l_gs,l_depth,l_rdr,total";
}

std::string to_csv(const MetricRow& r) {
  return std::to_string(r.iteration) + "," + r.split + "," + fmt(r.psnr) + "," + fmt(r.ssim) +
         "," + fmt(r.l1) + "," + fmt(r.mse) + "," + (r.avge ? fmt(*r.avge) : std::string()) +
         "," + fmt(r.l_gs) + "," + fmt(r.l_depth) + "," + fmt(r.l_rdr) + "," + fmt(r.total);
}

std::size_t view_for_iteration(std::uint64_t seed, std::size_t num_views, int iteration) {
  if (num_views == 0) throw std::invalid_argument("no training views");
  const std::size_t k = static_cast<std::size_t>(std::max(1, iteration) - 1);
  const std::size_t epoch = k / num_views, pos = k % num_views;
  std::vector<std::size_t> order(num_views);
  std::iota(order.begin(), order.end(), 0);
  CounterRng rng(seed, Stream::ViewOrder, epoch);
  for (std::size_t i = num_views; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order[pos];
}

Trainer::Trainer(TrainConfig config, Dataset dataset, GaussianCloud init)
    : config_(std::move(config)), dataset_(std::move(dataset)) {
  config_.validate();
  dataset_.validate();
  if (init.empty()) throw TrainingError("initial cloud is empty");
  cloud_ = with_sh_degree(init, config_.sh_degree);
  cloud_.scene_extent = dataset_.scene_extent;
  cloud_.normalize_rotations();
  adam_ = AdamState::for_cloud(cloud_);
  stats_.resize(cloud_.size());
  if (config_.ess.enabled) {
    for (const View& v : dataset_.train) edge_maps_.push_back(sobel_edge_map(v.image));
  }
}

Trainer::Trainer(TrainConfig config, Dataset dataset)
    : Trainer(config, dataset,
              init_random_cloud(dataset.bounds, static_cast<std::size_t>(config.init_points),
                                config.sh_degree, dataset.scene_extent, config.seed)) {}

int Trainer::active_sh_degree() const {
  return std::min(config_.sh_degree, (iteration_ + 1) / config_.sh_increase_interval);
}

double Trainer::position_lr(int iteration) const {
  const double init = config_.lr.position_init * dataset_.scene_extent;
  const double final_lr = config_.lr.position_final * dataset_.scene_extent;
  if (init <= 0.0) return 0.0;
  const double t = std::clamp(static_cast<double>(iteration) / config_.iterations, 0.0, 1.0);
  return std::exp((1.0 - t) * std::log(init) + t * std::log(final_lr));
}

void Trainer::replace_cloud(StructuralEdit edit) {
  if (edit.cloud.size() != edit.source_rows.size()) {
    throw std::invalid_argument("structural edit row map length differs from the cloud");
  }
  if (edit.cloud.empty()) throw TrainingError("structural edit left an empty cloud");
  adam_.remap(edit.source_rows);
  stats_.remap(edit.source_rows);
  cloud_ = std::move(edit.cloud);
}

IterationGradients iteration_gradients(const GaussianCloud& cloud, const View& view,
                                       const TrainConfig& config, int iteration, int sh_degree) {
  RenderOptions opts;
  opts.precision = config.precision;
  opts.background = config.background;
  opts.keep_record = true;
  opts.sh_degree = sh_degree;

  const RenderOutput full = render(cloud, view.camera, {}, opts);
  LossValue gs = gs_loss(full.color, view.image);
  Image d_color = std::move(gs.gradient);

  double l_depth = 0.0;
  std::optional<Image> d_depth;
  if (config.lambda_depth > 0.0 && view.depth) {
    DepthLoss dl = depth_loss(full.depth, *view.depth);
    l_depth = dl.value;
    scale_image(dl.gradient, config.lambda_depth);
    d_depth = std::move(dl.gradient);
  }

  IterationGradients out;
  out.grads = render_backward(cloud, view.camera, *full.record, d_color, d_depth ? &*d_depth : nullptr);

  double l_rdr = 0.0;
  const double lambda_rdr = config.rdr.enabled ? config.rdr.lambda : 0.0;
  if (config.rdr.enabled) {
    const DropoutMask mask =
        sample_mask(cloud.size(), config.rdr.rate, config.seed, static_cast<std::uint64_t>(iteration));
    const RenderOutput sub = sub_model_render(cloud, view.camera, mask, opts);
    LossValue r = rdr_loss(full.color, sub.color);
    l_rdr = r.value;
    scale_image(r.gradient, lambda_rdr);
    const RenderGradients sub_grads = render_backward(cloud, view.camera, *sub.record, r.gradient);
    add_into(out.grads.params, sub_grads.params);
  }
  out.loss = total_loss(gs.value, l_depth, l_rdr, config.lambda_depth, lambda_rdr);
  return out;
}

IterationInfo Trainer::step() {
  if (finished()) throw std::logic_error("training already finished");
  const int it = iteration_ + 1;
  const std::size_t vi = view_for_iteration(config_.seed, dataset_.train.size(), it);
  const View& view = dataset_.train[vi];

  IterationGradients ig = iteration_gradients(cloud_, view, config_, it, active_sh_degree());
  const RenderGradients& grads = ig.grads;

  // Screen-space gradient norms for densification, in NDC units.
  if (config_.densify.enabled && it < config_.densify.end) {
    const double sx = 0.5 * view.camera.width, sy = 0.5 * view.camera.height;
    for (std::size_t i = 0; i < cloud_.size(); ++i) {
      if (!grads.visible[i]) continue;
      const Eigen::Vector2d g = grads.mean2d[i];
      stats_.grad_accum[i] += std::hypot(g.x() * sx, g.y() * sy);
      stats_.denom[i] += 1.0;
    }
  }

  GroupRates lr{};
  lr[static_cast<int>(Param::Mean)] = position_lr(it);
  lr[static_cast<int>(Param::LogScale)] = config_.lr.scaling;
  lr[static_cast<int>(Param::Rotation)] = config_.lr.rotation;
  lr[static_cast<int>(Param::OpacityLogit)] = config_.lr.opacity;
  lr[static_cast<int>(Param::ShDc)] = config_.lr.sh_dc;
  lr[static_cast<int>(Param::ShRest)] = config_.lr.sh_rest;
  adam_step(cloud_, grads.params, adam_, lr);

  iteration_ = it;
  run_structural_updates();

  IterationInfo info;
  info.iteration = it;
  info.view = vi;
  info.loss = ig.loss;
  info.num_gaussians = cloud_.size();
  return info;
}

void Trainer::run_structural_updates() {
  const int it = iteration_;
  const DensifyConfig& d = config_.densify;
  if (d.enabled && it < d.end) {
    if (it > d.start && it % d.interval == 0) {
      CounterRng rng(config_.seed, Stream::Split, static_cast<std::uint64_t>(it));
      DensifyResult res = densify_and_prune(cloud_, stats_, d, it > d.opacity_reset_interval, rng);
      replace_cloud(std::move(res.edit));
      stats_.reset();
    }
    if (it % d.opacity_reset_interval == 0) {
      const double cap = logit(0.01);
      auto& op = cloud_.params[Param::OpacityLogit];
      for (double& v : op) v = std::min(v, cap);
      std::fill(adam_.m[Param::OpacityLogit].begin(), adam_.m[Param::OpacityLogit].end(), 0.0);
      std::fill(adam_.v[Param::OpacityLogit].begin(), adam_.v[Param::OpacityLogit].end(), 0.0);
    }
  }
  const EssConfig& e = config_.ess;
  if (e.enabled && it >= e.start && it <= e.end && it % e.interval == 0) run_ess();
}

void Trainer::run_ess() {
  RenderOptions opts;
  opts.precision = config_.precision;
  opts.background = config_.background;
  opts.keep_record = true;
  opts.sh_degree = active_sh_degree();
  if (edge_maps_.size() != dataset_.train.size()) {
    edge_maps_.clear();
    for (const View& v : dataset_.train) edge_maps_.push_back(sobel_edge_map(v.image));
  }
  EdgeScoreTable table;
  for (std::size_t k = 0; k < dataset_.train.size(); ++k) {
    const RenderOutput out = render(cloud_, dataset_.train[k].camera, {}, opts);
    table.views.push_back(per_view_edge_score(*out.record, edge_maps_[k]));
  }
  const double scale_thr =
      config_.ess.scale_multiplier * config_.densify.percent_dense * cloud_.scene_extent;
  const std::vector<bool> mask =
      ess_mask(cloud_, table.aggregate(), scale_thr, config_.ess.edge_threshold);
  last_ess_splits_ = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (last_ess_splits_ == 0) return;
  CounterRng rng(config_.seed, Stream::Ess, static_cast<std::uint64_t>(iteration_));
  replace_cloud(apply_ess(cloud_, mask, rng));
}

struct CheckpointAccess {
  static CheckpointData capture(const Trainer& t) {
    return {t.config_, t.iteration_, t.cloud_, t.adam_, t.stats_};
  }
  static Trainer restore(CheckpointData data, Dataset dataset) {
    Trainer t(data.config, std::move(dataset), data.cloud);
    if (data.adam.m.size() != t.cloud_.size() || data.stats.grad_accum.size() != t.cloud_.size()) {
      throw InputError("checkpoint optimizer state does not match its cloud");
    }
    t.cloud_ = std::move(data.cloud);
    t.cloud_.scene_extent = t.dataset_.scene_extent;
    t.adam_ = std::move(data.adam);
    t.stats_ = std::move(data.stats);
    t.iteration_ = data.iteration;
    return t;
  }
};

void Trainer::save_checkpoint(const std::string& path) const {
  write_checkpoint(path, CheckpointAccess::capture(*this));
}

Trainer Trainer::load_checkpoint(const std::string& path, Dataset dataset) {
  return CheckpointAccess::restore(read_checkpoint(path), std::move(dataset));
}

}  // namespace splatdrop
