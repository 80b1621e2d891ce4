#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splatdrop/config.hpp"
#include "splatdrop/synthetic.hpp"

namespace splatdrop {

struct PilotPoint {
  int views = 0;
  int primitives = 0;
  std::uint64_t seed = 0;
  int iteration = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_psnr = 0.0;
};

struct PilotOptions {
  int iterations = 3000;
  int log_interval = 100;
  std::vector<std::uint64_t> seeds = {0};
};

// Fixed-complexity training (no densification, pruning, ESS or RDR) for every
// (views, primitives, seed) cell. Loss is the base 3DGS loss averaged over the
// split's views, logged every log_interval iterations and at iteration 0.
std::vector<PilotPoint> pilot_sweep(const SyntheticSceneSpec& scene, const std::vector<int>& views,
                                    const std::vector<int>& primitives, const TrainConfig& base,
                                    const PilotOptions& options);

std::string pilot_csv(const std::vector<PilotPoint>& points);

// Summary of one pilot curve.
struct CurveSummary {
  int best_test_iteration = 0;
  double best_test_loss = 0.0;
  double train_loss_at_best = 0.0;
  double final_train_loss = 0.0;
  int final_iteration = 0;
};
CurveSummary summarize_curve(const std::vector<PilotPoint>& curve);

struct ScaleHistogram {
  double log10_min = -4.0;
  double log10_max = 1.0;
  std::vector<std::size_t> counts;
};

// Histogram of log10(max activated scale); values outside the range land in the end bins.
ScaleHistogram scale_histogram(const GaussianCloud& cloud, int bins, double log10_min = -4.0,
                               double log10_max = 1.0);
std::string histogram_csv(const ScaleHistogram& h);

}  // namespace splatdrop
