#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "helpers.hpp"
#include "splatdrop/metrics.hpp"
#include "splatdrop/rasterizer.hpp"
#include "splatdrop/rdr.hpp"

namespace testutil {

// One dropped primitive g, sub-model render against the full render as a
// constant target. Counts primitives whose extent disk misses g's disk (grown
// by `dilation` pixels) yet still receive a nonzero gradient.
struct LocalityResult {
  std::size_t far_l1 = 0;            // candidates for the L1 term, literal extents
  std::size_t violations_l1 = 0;
  std::size_t far_literal = 0;       // candidates for the full loss, literal extents
  std::size_t violations_literal = 0;
  std::size_t far_dilated = 0;       // candidates for the full loss, dilated extent
  std::size_t violations_dilated = 0;
};

// The SSIM term reaches from a pixel to any window centre whose square window
// holds it, then across that window: two square half-widths, diagonal included.
inline const double kSsimReach = 2.0 * (kSsimWindow / 2) * std::sqrt(2.0);

inline bool any_nonzero(const RenderGradients& g, std::size_t i) {
  for (Param p : kAllParams)
    for (int k = 0; k < g.params.width(p); ++k)
      if (g.params.row(p, i)[k] != 0.0) return true;
  return false;
}

inline LocalityResult check_locality(std::uint64_t seed) {
  MicroSceneOptions mo;
  mo.max_primitives = 60;
  mo.min_scale = 0.03;
  mo.max_scale = 0.12;
  mo.spread = 1.0;
  GaussianCloud cloud = micro_scene(seed, mo);
  while (cloud.size() < 20) cloud = micro_scene(seed += 1000, mo);
  const Camera cam = front_camera(64, 64);

  RenderOptions opt;
  opt.precision = Precision::Float64;
  const RenderOutput full = render(cloud, cam, {}, opt);
  const ProjectedCloud pc = project_cloud(cloud, cam);

  // Drop the first visible primitive in index order after a seeded offset.
  CounterRng rng(seed, Stream::Test, 40);
  std::size_t g = rng.below(cloud.size());
  for (std::size_t t = 0; t < cloud.size() && !pc.splats[g].visible(); ++t) g = (g + 1) % cloud.size();

  DropoutMask mask;
  mask.bits.assign(cloud.size(), 1);
  mask.bits[g] = 0;
  RenderOptions ropt = opt;
  ropt.keep_record = true;
  const RenderOutput sub = sub_model_render(cloud, cam, mask, ropt);

  Image d_l1(64, 64, 3);
  const double n = double(sub.color.data.size());
  for (std::size_t i = 0; i < d_l1.data.size(); ++i) {
    const double d = sub.color.data[i] - full.color.data[i];
    d_l1.data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
  }
  const RenderGradients g_l1 = render_backward(cloud, cam, *sub.record, d_l1);
  const RenderGradients g_full = render_backward(cloud, cam, *sub.record, rdr_loss(full.color, sub.color).gradient);

  LocalityResult res;
  const auto& sg = pc.splats[g];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (i == g) continue;
    const auto& si = pc.splats[i];
    const double dist = si.visible() ? (si.mean2d - sg.mean2d).norm() : INFINITY;
    const double reach = si.extent_radius + sg.extent_radius;
    if (dist > reach) {
      ++res.far_l1;
      ++res.far_literal;
      if (any_nonzero(g_l1, i)) ++res.violations_l1;
      if (any_nonzero(g_full, i)) ++res.violations_literal;
    }
    if (dist > reach + kSsimReach) {
      ++res.far_dilated;
      if (any_nonzero(g_full, i)) ++res.violations_dilated;
    }
  }
  return res;
}

}  // namespace testutil
