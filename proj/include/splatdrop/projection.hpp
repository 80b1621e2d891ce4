#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "splatdrop/camera.hpp"
#include "splatdrop/gaussian_model.hpp"

namespace splatdrop {

inline constexpr double kBlurFloor = 0.3;  // px^2 added to every screen covariance
inline constexpr int kTileSize = 16;

struct ProjectedMean {
  Eigen::Vector2d mean2d;
  double depth;
};

// Pinhole projection. Returns nullopt when the point is not in front of the near plane.
std::optional<ProjectedMean> project_mean(const Eigen::Vector3d& world, const Camera& cam);

// Jacobian of (u, v) with respect to a camera-space point.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d& cam_point,
                                                const Camera& cam);

// J W Sigma W^T J^T + blur * I.
Eigen::Matrix2d project_cov(const Eigen::Matrix3d& cov3d, const Eigen::Matrix3d& world_to_cam,
                            const Eigen::Matrix<double, 2, 3>& jacobian);

// ceil(3 sqrt(lambda_max)).
int compute_extent(const Eigen::Matrix2d& cov2d);

struct ProjectedGaussian {
  Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
  double depth = 0.0;
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d inv_cov2d = Eigen::Matrix2d::Zero();
  int extent_radius = 0;  // 0 marks a culled primitive
  std::uint32_t source_index = 0;

  bool visible() const { return extent_radius > 0; }
};

// Everything the compositor needs about one view of the cloud.
struct ProjectedCloud {
  int width = 0;
  int height = 0;
  std::vector<ProjectedGaussian> splats;  // indexed by source index
  std::vector<Eigen::Vector3d> colors;    // clamped to >= 0
  std::vector<Eigen::Vector3d> raw_colors;
  std::vector<double> opacities;
  std::vector<Eigen::Vector3d> cam_points;

  std::size_t size() const { return splats.size(); }
};

// Projects every primitive. Culled primitives keep extent_radius == 0.
// `sh_degree` < 0 uses the cloud's full degree. Throws std::invalid_argument
// naming the first primitive with non-finite parameters.
ProjectedCloud project_cloud(const GaussianCloud& cloud, const Camera& cam, int sh_degree = -1);

// Whether the disk of radius r around `center` touches the pixel rectangle
// [x0, x1] x [y0, y1].
bool disk_intersects_rect(const Eigen::Vector2d& center, double r, double x0, double y0,
                          double x1, double y1);

struct TileGrid {
  int tiles_x = 0;
  int tiles_y = 0;
  int width = 0;
  int height = 0;
  // Per tile: projected indices sorted by (depth, source_index).
  std::vector<std::vector<std::uint32_t>> tiles;

  const std::vector<std::uint32_t>& tile(int tx, int ty) const {
    return tiles[static_cast<std::size_t>(ty) * tiles_x + tx];
  }
};

TileGrid bin_and_sort(const std::vector<ProjectedGaussian>& splats, int width, int height);

}  // namespace splatdrop
