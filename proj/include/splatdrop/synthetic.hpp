#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "splatdrop/dataset.hpp"

namespace splatdrop {

enum class SyntheticKind { GaussianSoup, TexturedCuboid };

struct SyntheticSceneSpec {
  SyntheticKind kind = SyntheticKind::GaussianSoup;
  int primitives = 400;          // soup: number of Gaussians; cuboid: samples per face
  int train_views = 3;
  int test_views = 25;
  int width = 64;
  int height = 64;
  std::uint64_t seed = 7;
  double camera_distance = 4.0;
  double fov_x = 0.8;            // radians
  double train_arc = 0.35;       // half-angle spanned by training cameras, radians
  double test_arc = 0.7;         // half-angle spanned by test cameras, radians
  double noise = 0.03;           // std-dev of Gaussian pixel noise added to train images
  Eigen::Vector3d background = Eigen::Vector3d::Zero();

  void validate() const;
  static SyntheticSceneSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  // "default", "soup", "cuboid", or a path to a JSON file.
  static SyntheticSceneSpec parse(const std::string& name_or_path);
};

struct SyntheticScene {
  Dataset dataset;
  GaussianCloud ground_truth;
};

// Builds the ground-truth cloud and renders every view with the 64-bit
// compositor. Train and test cameras never coincide.
SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec);

}  // namespace splatdrop
