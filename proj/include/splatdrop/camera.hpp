#pragma once

#include <Eigen/Dense>

namespace splatdrop {

// Pinhole camera. The pose maps world points into camera space
// (x right, y down, z forward): p_cam = rotation * p_world + translation.
struct Camera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  double near = 0.01;
  double far = 100.0;

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const {
    return rotation * world + translation;
  }
  // Throws std::invalid_argument if intrinsics or pose are not usable.
  void validate() const;

  // Camera at `eye` looking at `target`; `up` is the approximate world up.
  static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double fov_x, int width, int height);
};

}  // namespace splatdrop
