#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "splatdrop/camera.hpp"
#include "splatdrop/gaussian_model.hpp"
#include "splatdrop/types.hpp"

namespace splatdrop {

struct View {
  std::string name;
  Camera camera;
  Image image;                 // 3 channels in [0,1]
  std::optional<Image> depth;  // 1 channel, world units
};

struct Dataset {
  std::vector<View> train;
  std::vector<View> test;
  double scene_extent = 1.0;
  AxisAlignedBox bounds;  // region used for random initialisation

  // Checks resolutions per split, finite cameras and extent > 0.
  void validate() const;
  // Keeps the first k training views (k <= 0 keeps all) and recomputes the extent.
  void limit_train_views(int k);
};

// 1.1 x the largest distance from the mean training camera centre, or 1 when
// the cameras coincide.
double camera_extent(const std::vector<View>& views);

// Converts a camera-to-world matrix in OpenGL axes (-z forward, +y up) into
// the internal world-to-camera pose (+z forward, +y down), and back.
void pose_from_blender(const Eigen::Matrix4d& c2w_gl, Eigen::Matrix3d& rotation,
                       Eigen::Vector3d& translation);
Eigen::Matrix4d pose_to_blender(const Eigen::Matrix3d& rotation,
                                const Eigen::Vector3d& translation);

// Reads transforms_train.json / transforms_test.json (or a single
// transforms.json used as the training split) from `directory`.
Dataset load_blender_transforms(const std::string& directory,
                                const Eigen::Vector3d& background = Eigen::Vector3d::Zero(),
                                bool load_images = true);

}  // namespace splatdrop
