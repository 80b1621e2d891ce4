#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "splatdrop/ess.hpp"
#include "splatdrop/gaussian_model.hpp"
#include "splatdrop/rdr.hpp"
#include "splatdrop/types.hpp"

namespace splatdrop {

struct LearningRates {
  double position_init = 1.6e-4;  // times scene extent
  double position_final = 1.6e-6;
  double sh_dc = 0.0025;
  double sh_rest = 0.0025 / 20.0;
  double opacity = 0.05;
  double scaling = 0.005;
  double rotation = 0.001;
};

struct DensifyConfig {
  bool enabled = true;
  int interval = 100;
  int start = 500;
  int end = 4500;
  double grad_threshold = 2e-4;
  double percent_dense = 0.01;
  double prune_opacity = 5e-3;
  int opacity_reset_interval = 3000;
  double max_world_scale = 0.1;  // times extent, pruned after the first opacity reset
};

struct TrainConfig {
  int iterations = 6000;
  std::uint64_t seed = 0;
  Precision precision = Precision::Float32;
  Precision eval_precision = Precision::Float64;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  int sh_degree = 3;
  int sh_increase_interval = 1000;
  int init_points = 10000;
  LearningRates lr;
  DensifyConfig densify;
  RdrConfig rdr;
  EssConfig ess;
  double lambda_depth = 0.0;
  int eval_interval = 500;
  int checkpoint_interval = 0;  // 0: final checkpoint only

  // Throws InputError describing the first invalid field.
  void validate() const;

  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Dataset presets: "llff" (rate 0.4, lambda 0.2, edge 1e-3, scale x50) and
  // "dtu" (0.3, 0.5, 5e-2, x1).
  void apply_preset(const std::string& name);

  // Sets a dotted key such as "rdr.rate" from its string form.
  void set(const std::string& key, const std::string& value);
};

}  // namespace splatdrop
