#include "splatdrop/pilot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "splatdrop/trainer.hpp"

namespace splatdrop {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::vector<PilotPoint> pilot_sweep(const SyntheticSceneSpec& scene, const std::vector<int>& views,
                                    const std::vector<int>& primitives, const TrainConfig& base,
                                    const PilotOptions& options) {
  if (options.iterations < 1 || options.log_interval < 1) {
    throw InputError("pilot iterations and log interval must be >= 1");
  }
  std::vector<PilotPoint> points;
  for (int v : views) {
    SyntheticSceneSpec spec = scene;
    spec.train_views = v;
    const SyntheticScene generated = generate_synthetic_scene(spec);
    for (int n : primitives) {
      if (n < 1) throw InputError("pilot primitive counts must be >= 1");
      for (std::uint64_t seed : options.seeds) {
        TrainConfig cfg = base;
        cfg.iterations = options.iterations;
        cfg.seed = seed;
        cfg.init_points = n;
        cfg.densify.enabled = false;
        cfg.ess.enabled = false;
        cfg.rdr.enabled = false;
        Trainer trainer(cfg, generated.dataset);
        auto log = [&]() {
          const auto train = evaluate(trainer.cloud(), trainer.dataset().train, cfg,
                                      trainer.iteration(), "train");
          const auto test = evaluate(trainer.cloud(), trainer.dataset().test, cfg,
                                     trainer.iteration(), "test");
          PilotPoint p;
          p.views = v;
          p.primitives = n;
          p.seed = seed;
          p.iteration = trainer.iteration();
          p.train_loss = train.front().l_gs;
          p.test_loss = test.front().l_gs;
          p.test_psnr = test.front().psnr;
          points.push_back(p);
        };
        log();
        while (!trainer.finished()) {
          trainer.step();
          if (trainer.iteration() % options.log_interval == 0 || trainer.finished()) log();
        }
      }
    }
  }
  return points;
}

std::string pilot_csv(const std::vector<PilotPoint>& points) {
  std::string out = "views,primitives,seed,iteration,train_loss,test_loss,test_psnr\n";
  for (const PilotPoint& p : points) {
    out += std::to_string(p.views) + "," + std::to_string(p.primitives) + "," +
           std::to_string(p.seed) + "," + std::to_string(p.iteration) + "," + fmt(p.train_loss) +
           "," + fmt(p.test_loss) + "," + fmt(p.test_psnr) + "\n";
  }
  return out;
}

CurveSummary summarize_curve(const std::vector<PilotPoint>& curve) {
  if (curve.empty()) throw std::invalid_argument("summarize_curve: empty curve");
  CurveSummary s;
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].test_loss < curve[best].test_loss) best = i;
  }
  s.best_test_iteration = curve[best].iteration;
  s.best_test_loss = curve[best].test_loss;
  s.train_loss_at_best = curve[best].train_loss;
  s.final_train_loss = curve.back().train_loss;
  s.final_iteration = curve.back().iteration;
  return s;
}

ScaleHistogram scale_histogram(const GaussianCloud& cloud, int bins, double log10_min,
                               double log10_max) {
  if (bins < 1) throw std::invalid_argument("scale_histogram: bins must be >= 1");
  if (!(log10_max > log10_min)) throw std::invalid_argument("scale_histogram: empty range");
  ScaleHistogram h;
  h.log10_min = log10_min;
  h.log10_max = log10_max;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double x = std::log10(cloud.max_scale(i));
    const double t = (x - log10_min) / (log10_max - log10_min) * bins;
    const int b = std::isfinite(t) ? std::clamp(static_cast<int>(std::floor(t)), 0, bins - 1)
                                   : (x > 0 ? bins - 1 : 0);
    h.counts[static_cast<std::size_t>(b)] += 1;
  }
  return h;
}

std::string histogram_csv(const ScaleHistogram& h) {
  std::string out = "bin,log10_lo,log10_hi,count\n";
  const double w = (h.log10_max - h.log10_min) / static_cast<double>(h.counts.size());
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out += std::to_string(b) + "," + fmt(h.log10_min + w * b) + "," +
           fmt(h.log10_min + w * (b + 1)) + "," + std::to_string(h.counts[b]) + "\n";
  }
  return out;
}

}  // namespace splatdrop
