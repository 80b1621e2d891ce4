#include "splatdrop/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace splatdrop::reference {

ReferenceRender render(const GaussianCloud& cloud, const Camera& cam,
                       std::span<const std::uint8_t> keep, const Eigen::Vector3d& background,
                       int sh_degree) {
  if (!keep.empty() && keep.size() != cloud.size()) {
    throw std::invalid_argument("reference::render: mask length mismatch");
  }
  const ProjectedCloud pc = project_cloud(cloud, cam, sh_degree);
  const std::size_t n = cloud.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (pc.splats[a].depth != pc.splats[b].depth) return pc.splats[a].depth < pc.splats[b].depth;
    return a < b;
  });

  ReferenceRender out;
  out.color = Image(cam.width, cam.height, 3);
  out.depth = Image(cam.width, cam.height, 1);
  out.final_transmittance = Image(cam.width, cam.height, 1);
  out.weights.resize(out.color.pixel_count());
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double tr = 1.0;
      double rgb[3] = {0.0, 0.0, 0.0};
      double depth = 0.0;
      auto& weights = out.weights[static_cast<std::size_t>(y) * cam.width + x];
      for (std::uint32_t i : order) {
        if (!keep.empty() && !keep[i]) continue;
        const ProjectedGaussian& g = pc.splats[i];
        if (g.extent_radius <= 0) continue;
        const double dx = px - g.mean2d.x(), dy = py - g.mean2d.y();
        const double r = g.extent_radius;
        if (dx * dx + dy * dy > r * r) continue;
        const double q = g.inv_cov2d(0, 0) * dx * dx + 2.0 * g.inv_cov2d(0, 1) * dx * dy +
                         g.inv_cov2d(1, 1) * dy * dy;
        const double alpha = std::min(0.99, pc.opacities[i] * std::exp(-0.5 * q));
        if (alpha < 1.0 / 255.0) continue;
        const double w = alpha * tr;
        for (int c = 0; c < 3; ++c) rgb[c] += w * pc.colors[i][c];
        depth += w * g.depth;
        weights.push_back({i, w});
        tr *= 1.0 - alpha;
      }
      for (int c = 0; c < 3; ++c) out.color.at(x, y, c) = rgb[c] + tr * background[c];
      out.depth.at(x, y) = depth + tr * cam.far;
      out.final_transmittance.at(x, y) = tr;
    }
  }
  return out;
}

}  // namespace splatdrop::reference
