#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "splatdrop/rasterizer.hpp"
#include "splatdrop/rdr.hpp"

namespace testutil {

struct GradMismatch {
  std::uint64_t seed = 0;
  std::size_t primitive = 0;
  Param group = Param::Mean;
  int component = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckResult {
  std::size_t checked = 0;
  double worst_rel = 0.0;  // over entries whose absolute error exceeds abs_tol
  double worst_abs = 0.0;
  std::vector<GradMismatch> mismatches;
};

inline constexpr int kMicroSize = 16;
inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRelTol = 1e-3;
inline constexpr double kFdAbsTol = 1e-6;

// L = <W_c, C> + <W_d, D> on a random micro-scene, optionally under a random
// dropout mask. Compares render_backward with central differences on every
// parameter value.
inline GradCheckResult check_micro_scene(std::uint64_t seed, bool masked) {
  GaussianCloud cloud = micro_scene(seed);
  const Camera cam = front_camera(kMicroSize, kMicroSize);
  std::vector<std::uint8_t> keep;
  if (masked) keep = sample_mask(cloud.size(), 0.4, seed, 1).bits;

  RenderOptions opt;
  opt.precision = Precision::Float64;
  opt.background = {0.1, 0.2, 0.3};
  const Image wc = random_image(kMicroSize, kMicroSize, 3, seed * 2 + 1);
  Image wd = random_image(kMicroSize, kMicroSize, 1, seed * 2 + 2);
  for (double& v : wd.data) v *= 0.01;

  auto loss = [&](const GaussianCloud& c) {
    RenderOutput out = render(c, cam, keep, opt);
    return dot(wc, out.color) + dot(wd, out.depth);
  };

  RenderOptions ropt = opt;
  ropt.keep_record = true;
  RenderOutput out = render(cloud, cam, keep, ropt);
  RenderGradients g = render_backward(cloud, cam, *out.record, wc, &wd);

  GradCheckResult res;
  for (Param p : kAllParams) {
    const int w = cloud.params.width(p);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int k = 0; k < w; ++k) {
        GaussianCloud plus = cloud, minus = cloud;
        plus.params.row(p, i)[k] += kFdStep;
        minus.params.row(p, i)[k] -= kFdStep;
        const double numeric = (loss(plus) - loss(minus)) / (2.0 * kFdStep);
        const double analytic = g.params.row(p, i)[k];
        const double abs_err = std::abs(analytic - numeric);
        const double rel_err = abs_err / std::max({std::abs(analytic), std::abs(numeric), 1e-300});
        ++res.checked;
        res.worst_abs = std::max(res.worst_abs, abs_err);
        if (abs_err >= kFdAbsTol) {
          res.worst_rel = std::max(res.worst_rel, rel_err);
          if (rel_err >= kFdRelTol) res.mismatches.push_back({seed, i, p, k, analytic, numeric});
        }
      }
    }
  }
  return res;
}

inline std::string describe(const GradMismatch& m) {
  return "seed " + std::to_string(m.seed) + " primitive " + std::to_string(m.primitive) + " " +
         param_name(m.group) + "[" + std::to_string(m.component) +
         "] analytic=" + std::to_string(m.analytic) + " numeric=" + std::to_string(m.numeric);
}

}  // namespace testutil
