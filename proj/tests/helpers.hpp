#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "splatdrop/camera.hpp"
#include "splatdrop/gaussian_model.hpp"
#include "splatdrop/rng.hpp"
#include "splatdrop/types.hpp"

namespace testutil {

using namespace splatdrop;

// Camera on the -z axis looking at the origin.
inline Camera front_camera(int w, int h, double distance = 4.0, double fov_x = 0.8) {
  return Camera::look_at({0.0, 0.0, -distance}, {0.0, 0.0, 0.0}, {0.0, -1.0, 0.0}, fov_x, w, h);
}

inline Eigen::Vector4d random_quaternion(CounterRng& rng) {
  Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q / q.norm();
}

struct MicroSceneOptions {
  int max_primitives = 8;
  int sh_degree = -1;  // < 0: random in [0, 3]
  double spread = 0.7;
  double min_scale = 0.08;
  double max_scale = 0.35;
  double min_logit = -1.0;
  double max_logit = 2.0;
};

// Small random cloud in front of front_camera(). Base colours stay well above
// zero so the colour clamp never engages.
inline GaussianCloud micro_scene(std::uint64_t seed, const MicroSceneOptions& o = {}) {
  CounterRng rng(seed, Stream::Test, 11);
  const int n = 1 + static_cast<int>(rng.below(o.max_primitives));
  const int degree = o.sh_degree >= 0 ? o.sh_degree : static_cast<int>(rng.below(4));
  GaussianCloud c(n, degree);
  for (int i = 0; i < n; ++i) {
    c.set_mean(i, {rng.uniform(-o.spread, o.spread), rng.uniform(-o.spread, o.spread),
                   rng.uniform(-0.5, 0.5)});
    c.set_log_scale(i, {std::log(rng.uniform(o.min_scale, o.max_scale)),
                        std::log(rng.uniform(o.min_scale, o.max_scale)),
                        std::log(rng.uniform(o.min_scale, o.max_scale))});
    c.set_rotation(i, random_quaternion(rng));
    c.set_opacity_logit(i, rng.uniform(o.min_logit, o.max_logit));
    c.set_base_color(i, {rng.uniform(0.3, 0.8), rng.uniform(0.3, 0.8), rng.uniform(0.3, 0.8)});
    for (double& v : std::span(c.params.row(Param::ShRest, i), c.params.width(Param::ShRest)))
      v = rng.uniform(-0.04, 0.04);
  }
  return c;
}

inline Image random_image(int w, int h, int channels, std::uint64_t seed, double lo = -1.0,
                          double hi = 1.0) {
  CounterRng rng(seed, Stream::Test, 12);
  Image img(w, h, channels);
  for (double& v : img.data) v = rng.uniform(lo, hi);
  return img;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

inline double dot(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("splatdrop_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
