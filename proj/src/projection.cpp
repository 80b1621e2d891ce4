#include "splatdrop/projection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include "splatdrop/sh.hpp"

namespace splatdrop {

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("camera: focal lengths must be > 0");
  if (!(near > 0.0) || !(near < far)) throw std::invalid_argument("camera: need 0 < near < far");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera: empty image size");
  if (!rotation.allFinite() || !translation.allFinite() || !std::isfinite(cx) ||
      !std::isfinite(cy)) {
    throw std::invalid_argument("camera: non-finite pose or principal point");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9 ||
      !(rotation * rotation.transpose()).isApprox(Eigen::Matrix3d::Identity(), 1e-9)) {
    throw std::invalid_argument("camera: rotation is not orthonormal");
  }
}

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double fov_x, int width, int height) {
  const Eigen::Vector3d z = (target - eye).normalized();
  const Eigen::Vector3d y = (-up + up.dot(z) * z).normalized();
  const Eigen::Vector3d x = y.cross(z);
  Camera cam;
  cam.rotation.row(0) = x.transpose();
  cam.rotation.row(1) = y.transpose();
  cam.rotation.row(2) = z.transpose();
  cam.translation = -cam.rotation * eye;
  cam.width = width;
  cam.height = height;
  cam.fx = width / (2.0 * std::tan(fov_x / 2.0));
  cam.fy = cam.fx;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  return cam;
}

std::optional<ProjectedMean> project_mean(const Eigen::Vector3d& world, const Camera& cam) {
  const Eigen::Vector3d p = cam.to_camera(world);
  if (p.z() <= cam.near) return std::nullopt;
  return ProjectedMean{{cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy}, p.z()};
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d& t, const Camera& cam) {
  const double iz = 1.0 / t.z();
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx * iz, 0.0, -cam.fx * t.x() * iz * iz, 0.0, cam.fy * iz, -cam.fy * t.y() * iz * iz;
  return j;
}

Eigen::Matrix2d project_cov(const Eigen::Matrix3d& cov3d, const Eigen::Matrix3d& world_to_cam,
                            const Eigen::Matrix<double, 2, 3>& jacobian) {
  const Eigen::Matrix<double, 2, 3> t = jacobian * world_to_cam;
  Eigen::Matrix2d c = t * cov3d * t.transpose();
  c(0, 1) = c(1, 0) = 0.5 * (c(0, 1) + c(1, 0));
  c(0, 0) += kBlurFloor;
  c(1, 1) += kBlurFloor;
  return c;
}

namespace {
double lambda_max(const Eigen::Matrix2d& c) {
  const double mid = 0.5 * (c(0, 0) + c(1, 1));
  const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  return mid + std::sqrt(std::max(0.0, mid * mid - det));
}
}  // namespace

int compute_extent(const Eigen::Matrix2d& cov2d) {
  return static_cast<int>(std::ceil(3.0 * std::sqrt(lambda_max(cov2d))));
}

bool disk_intersects_rect(const Eigen::Vector2d& c, double r, double x0, double y0, double x1,
                          double y1) {
  const double dx = c.x() - std::clamp(c.x(), x0, x1);
  const double dy = c.y() - std::clamp(c.y(), y0, y1);
  return dx * dx + dy * dy <= r * r;
}

ProjectedCloud project_cloud(const GaussianCloud& cloud, const Camera& cam, int sh_degree) {
  const std::size_t n = cloud.size();
  const int degree = sh_degree < 0 ? cloud.sh_degree() : std::min(sh_degree, cloud.sh_degree());
  ProjectedCloud out;
  out.width = cam.width;
  out.height = cam.height;
  out.splats.resize(n);
  out.colors.assign(n, Eigen::Vector3d::Zero());
  out.raw_colors.assign(n, Eigen::Vector3d::Zero());
  out.opacities.assign(n, 0.0);
  out.cam_points.assign(n, Eigen::Vector3d::Zero());
  const Eigen::Vector3d center = cam.center();
  std::atomic<std::int64_t> bad{-1};

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    ProjectedGaussian& g = out.splats[i];
    g.source_index = static_cast<std::uint32_t>(i);
    bool finite = true;
    for (Param p : kAllParams) {
      const double* r = cloud.params.row(p, i);
      for (int k = 0; k < cloud.params.width(p); ++k) finite = finite && std::isfinite(r[k]);
    }
    if (!finite || cloud.rotation(i).squaredNorm() == 0.0) {
      std::int64_t expected = -1;
      bad.compare_exchange_strong(expected, static_cast<std::int64_t>(i));
      continue;
    }
    const Eigen::Vector3d mu = cloud.mean(i);
    const Eigen::Vector3d t = cam.to_camera(mu);
    out.cam_points[i] = t;
    out.opacities[i] = cloud.opacity(i);
    const Eigen::Vector3d dir = (mu - center).normalized();
    out.raw_colors[i] = eval_color(degree, cloud.params.row(Param::ShDc, i),
                                   cloud.params.row(Param::ShRest, i), dir);
    out.colors[i] = out.raw_colors[i].cwiseMax(0.0);
    if (t.z() <= cam.near) continue;
    const Eigen::Matrix<double, 2, 3> j = projection_jacobian(t, cam);
    g.cov2d = project_cov(covariance3d(cloud.log_scale(i), cloud.rotation(i)), cam.rotation, j);
    g.inv_cov2d = g.cov2d.inverse();
    g.mean2d = {cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy};
    g.depth = t.z();
    const int radius = compute_extent(g.cov2d);
    if (disk_intersects_rect(g.mean2d, radius, 0.0, 0.0, cam.width, cam.height)) {
      g.extent_radius = radius;
    }
  }
  // Report the smallest offending index regardless of scheduling.
  if (bad.load() >= 0) {
    for (std::size_t i = 0; i < n; ++i) {
      bool finite = cloud.rotation(i).squaredNorm() != 0.0;
      for (Param p : kAllParams) {
        const double* r = cloud.params.row(p, i);
        for (int k = 0; k < cloud.params.width(p); ++k) finite = finite && std::isfinite(r[k]);
      }
      if (!finite) {
        throw std::invalid_argument("non-finite parameters in primitive " + std::to_string(i));
      }
    }
  }
  return out;
}

TileGrid bin_and_sort(const std::vector<ProjectedGaussian>& splats, int width, int height) {
  TileGrid grid;
  grid.width = width;
  grid.height = height;
  grid.tiles_x = (width + kTileSize - 1) / kTileSize;
  grid.tiles_y = (height + kTileSize - 1) / kTileSize;
  grid.tiles.assign(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y, {});
  for (std::size_t i = 0; i < splats.size(); ++i) {
    const ProjectedGaussian& g = splats[i];
    if (!g.visible()) continue;
    const double r = g.extent_radius;
    const int tx0 = std::max(0, static_cast<int>(std::floor((g.mean2d.x() - r) / kTileSize)));
    const int ty0 = std::max(0, static_cast<int>(std::floor((g.mean2d.y() - r) / kTileSize)));
    const int tx1 =
        std::min(grid.tiles_x - 1, static_cast<int>(std::floor((g.mean2d.x() + r) / kTileSize)));
    const int ty1 =
        std::min(grid.tiles_y - 1, static_cast<int>(std::floor((g.mean2d.y() + r) / kTileSize)));
    for (int ty = ty0; ty <= ty1; ++ty) {
      for (int tx = tx0; tx <= tx1; ++tx) {
        const double x0 = tx * kTileSize, y0 = ty * kTileSize;
        const double x1 = std::min(width, (tx + 1) * kTileSize);
        const double y1 = std::min(height, (ty + 1) * kTileSize);
        if (disk_intersects_rect(g.mean2d, r, x0, y0, x1, y1)) {
          grid.tiles[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(
              static_cast<std::uint32_t>(i));
        }
      }
    }
  }
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(grid.tiles.size()); ++t) {
    auto& list = grid.tiles[t];
    std::sort(list.begin(), list.end(), [&](std::uint32_t a, std::uint32_t b) {
      const ProjectedGaussian& ga = splats[a];
      const ProjectedGaussian& gb = splats[b];
      if (ga.depth != gb.depth) return ga.depth < gb.depth;
      return ga.source_index < gb.source_index;
    });
  }
  return grid;
}

}  // namespace splatdrop
