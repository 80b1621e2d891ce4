#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splatdrop/config.hpp"
#include "splatdrop/dataset.hpp"
#include "splatdrop/metrics.hpp"
#include "splatdrop/optimizer.hpp"
#include "splatdrop/rasterizer.hpp"

namespace splatdrop {

// Running 3DGS densification statistics: summed NDC-space positional
// gradient norms and the number of views each primitive was visible in.
struct DensifyStats {
  std::vector<double> grad_accum;
  std::vector<double> denom;

  void resize(std::size_t n);
  void remap(std::span<const std::int64_t> source_rows);
  void reset();
  bool operator==(const DensifyStats&) const = default;
};

struct DensifyResult {
  StructuralEdit edit;
  std::size_t cloned = 0;
  std::size_t split = 0;
  std::size_t pruned = 0;
};

// Clone small high-gradient primitives, split large ones, then prune
// low-opacity (and, when prune_big, oversized) ones. Throws TrainingError when
// nothing survives.
DensifyResult densify_and_prune(const GaussianCloud& cloud, const DensifyStats& stats,
                                const DensifyConfig& config, bool prune_big, CounterRng& rng);

struct MetricRow {
  int iteration = 0;
  std::string split;
  double psnr = 0.0;
  double ssim = 0.0;
  double l1 = 0.0;
  double mse = 0.0;
  std::optional<double> avge;
  double l_gs = 0.0;
  double l_depth = 0.0;
  double l_rdr = 0.0;
  double total = 0.0;
};

// Renders every view without a mask and averages its metrics into one row.
// An empty view list yields no rows.
std::vector<MetricRow> evaluate(const GaussianCloud& cloud, const std::vector<View>& views,
                                const TrainConfig& config, int iteration, const std::string& split,
                                std::optional<double> lpips = std::nullopt);

std::string metrics_csv_header();
std::string to_csv(const MetricRow& row);

// Index of the training view used at a 1-based iteration: epochs of shuffled order.
std::size_t view_for_iteration(std::uint64_t seed, std::size_t num_views, int iteration);

struct IterationGradients {
  RenderGradients grads;
  LossBreakdown loss;
};

// Losses of one training iteration on `view` and the gradient of their
// weighted sum: full render for the base and depth terms, dropout sub-model
// against the detached full render for the RDR term.
IterationGradients iteration_gradients(const GaussianCloud& cloud, const View& view,
                                       const TrainConfig& config, int iteration, int sh_degree);

struct IterationInfo {
  int iteration = 0;
  LossBreakdown loss;
  std::size_t view = 0;
  std::size_t num_gaussians = 0;
};

class Trainer {
 public:
  Trainer(TrainConfig config, Dataset dataset, GaussianCloud init);
  // Random initialisation inside dataset.bounds with config.init_points primitives.
  Trainer(TrainConfig config, Dataset dataset);

  // Runs one training iteration (the next one) and returns its losses.
  IterationInfo step();

  int iteration() const { return iteration_; }
  bool finished() const { return iteration_ >= config_.iterations; }
  const GaussianCloud& cloud() const { return cloud_; }
  const AdamState& optimizer() const { return adam_; }
  const DensifyStats& densify_stats() const { return stats_; }
  const TrainConfig& config() const { return config_; }
  const Dataset& dataset() const { return dataset_; }
  int active_sh_degree() const;

  // Cloud in/out with consistent optimizer state.
  void replace_cloud(StructuralEdit edit);

  void save_checkpoint(const std::string& path) const;
  static Trainer load_checkpoint(const std::string& path, Dataset dataset);

  // Exponentially decayed position learning rate (already scaled by extent).
  double position_lr(int iteration) const;

  std::size_t last_ess_splits() const { return last_ess_splits_; }

 private:
  void run_structural_updates();
  void run_ess();

  TrainConfig config_;
  Dataset dataset_;
  GaussianCloud cloud_;
  AdamState adam_;
  DensifyStats stats_;
  int iteration_ = 0;
  std::size_t last_ess_splits_ = 0;
  std::vector<Image> edge_maps_;

  friend struct CheckpointAccess;
};

}  // namespace splatdrop
