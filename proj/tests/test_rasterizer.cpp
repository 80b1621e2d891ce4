#include "doctest.h"

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "splatdrop/rasterizer.hpp"
#include "splatdrop/reference.hpp"

using namespace splatdrop;
using namespace testutil;

namespace {

// Single Gaussian with a known opacity right in front of the camera.
GaussianCloud one_gaussian(double opacity, Eigen::Vector3d rgb, double z = 0.0, double scale = 0.3) {
  GaussianCloud c(1, 0);
  c.set_mean(0, {0.0, 0.0, z});
  c.set_log_scale(0, Eigen::Vector3d::Constant(std::log(scale)));
  c.set_opacity_logit(0, logit(opacity));
  c.set_base_color(0, rgb);
  return c;
}

}  // namespace

TEST_CASE("empty cloud renders the background everywhere") {
  GaussianCloud c(0, 0);
  RenderOptions opt;
  opt.background = {0.2, 0.4, 0.6};
  opt.precision = Precision::Float64;
  auto out = render(c, front_camera(20, 12), {}, opt);
  CHECK(out.color.width == 20);
  CHECK(out.color.height == 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 20; ++x) {
      CHECK(out.color.at(x, y, 0) == 0.2);
      CHECK(out.color.at(x, y, 2) == 0.6);
      CHECK(out.final_transmittance.at(x, y) == 1.0);
      CHECK(out.depth.at(x, y) == front_camera(20, 12).far);
    }
}

TEST_CASE("centre pixel of a single splat follows the alpha formula") {
  // An even-sized image has no pixel centre on the optical axis; use 15x15.
  auto c = one_gaussian(0.5, {1.0, 0.0, 0.0});
  RenderOptions opt;
  opt.precision = Precision::Float64;
  const Camera cam = front_camera(15, 15);
  auto out = render(c, cam, {}, opt);
  // The splat is centred on pixel (7, 7), so alpha = o exactly.
  CHECK(out.color.at(7, 7, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.final_transmittance.at(7, 7) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.depth.at(7, 7) == doctest::Approx(0.5 * 4.0 + 0.5 * cam.far).epsilon(1e-12));
}

TEST_CASE("alpha is capped at 0.99") {
  auto c = one_gaussian(0.9999, {1.0, 1.0, 1.0});
  RenderOptions opt;
  opt.precision = Precision::Float64;
  auto out = render(c, front_camera(15, 15), {}, opt);
  CHECK(out.final_transmittance.at(7, 7) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("contributors below 1/255 are skipped") {
  auto c = one_gaussian(0.003, {1.0, 1.0, 1.0});
  RenderOptions opt;
  opt.precision = Precision::Float64;
  auto out = render(c, front_camera(15, 15), {}, opt);
  for (double v : out.color.data) CHECK(v == 0.0);
  CHECK(std::accumulate(out.contributor_count.begin(), out.contributor_count.end(), 0u) == 0u);
}

TEST_CASE("front primitive occludes the back one") {
  GaussianCloud c(2, 0);
  for (int i = 0; i < 2; ++i) {
    c.set_log_scale(i, Eigen::Vector3d::Constant(std::log(0.5)));
    c.set_opacity_logit(i, logit(0.99));
  }
  c.set_mean(0, {0.0, 0.0, 1.0});   // far, green
  c.set_base_color(0, {0.0, 1.0, 0.0});
  c.set_mean(1, {0.0, 0.0, -1.0});  // near, red
  c.set_base_color(1, {1.0, 0.0, 0.0});
  RenderOptions opt;
  opt.precision = Precision::Float64;
  auto out = render(c, front_camera(15, 15), {}, opt);
  CHECK(out.color.at(7, 7, 0) > 0.98);
  CHECK(out.color.at(7, 7, 1) < 0.02);
}

TEST_CASE("mask length mismatch throws") {
  auto c = micro_scene(3);
  std::vector<std::uint8_t> keep(c.size() + 1, 1);
  CHECK_THROWS_AS(render(c, front_camera(16, 16), keep), std::invalid_argument);
}

TEST_CASE("tiled render matches the brute-force compositor, with and without masks") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CAPTURE(seed);
    MicroSceneOptions mo;
    mo.max_primitives = 40;
    auto c = micro_scene(seed, mo);
    const Camera cam = front_camera(37, 29);  // several partial tiles
    std::vector<std::uint8_t> keep;
    if (seed % 2) keep = sample_mask(c.size(), 0.5, seed, 0).bits;
    RenderOptions opt;
    opt.precision = Precision::Float64;
    opt.early_stop = false;
    opt.background = {0.3, 0.1, 0.7};
    auto tiled = render(c, cam, keep, opt);
    auto ref = reference::render(c, cam, keep, opt.background);
    CHECK(max_abs_diff(tiled.color, ref.color) <= 1e-12);
    CHECK(max_abs_diff(tiled.final_transmittance, ref.final_transmittance) <= 1e-12);
  }
}

TEST_CASE("float32 render stays close to float64") {
  auto c = micro_scene(5);
  RenderOptions f64;
  f64.precision = Precision::Float64;
  RenderOptions f32;
  auto a = render(c, front_camera(16, 16), {}, f64);
  auto b = render(c, front_camera(16, 16), {}, f32);
  CHECK(max_abs_diff(a.color, b.color) < 1e-4);
}

TEST_CASE("backward matches central differences on micro-scenes") {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto res = check_micro_scene(seed, seed % 2 == 1);
    checked += res.checked;
    for (const auto& m : res.mismatches) FAIL_CHECK(describe(m));
  }
  CHECK(checked > 0);
}

TEST_CASE("dropped primitives receive zero gradient") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = micro_scene(seed);
    auto mask = sample_mask(c.size(), 0.5, seed, 3);
    RenderOptions opt;
    opt.precision = Precision::Float64;
    opt.keep_record = true;
    const Camera cam = front_camera(16, 16);
    auto out = render(c, cam, mask.bits, opt);
    auto g = render_backward(c, cam, *out.record, random_image(16, 16, 3, seed));
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (mask.bits[i]) continue;
      for (Param p : kAllParams)
        for (int k = 0; k < g.params.width(p); ++k) CHECK(g.params.row(p, i)[k] == 0.0);
    }
  }
}

TEST_CASE("backward is deterministic") {
  auto c = micro_scene(9);
  RenderOptions opt;
  opt.keep_record = true;
  const Camera cam = front_camera(16, 16);
  auto out = render(c, cam, {}, opt);
  const Image dc = random_image(16, 16, 3, 1);
  auto a = render_backward(c, cam, *out.record, dc);
  auto b = render_backward(c, cam, *out.record, dc);
  CHECK(a.params == b.params);
}

TEST_CASE("gradient map is normalized to [0, 1]") {
  auto c = micro_scene(4);
  RenderOptions opt;
  opt.keep_record = true;
  auto out = render(c, front_camera(16, 16), {}, opt);
  std::vector<double> mags(c.size(), 1.0);
  Image m = gradient_map(*out.record, mags);
  double mx = 0.0;
  for (double v : m.data) {
    CHECK(v >= 0.0);
    mx = std::max(mx, v);
  }
  CHECK(mx == doctest::Approx(1.0));
  std::vector<double> zeros(c.size(), 0.0);
  Image z = gradient_map(*out.record, zeros);
  for (double v : z.data) CHECK(v == 0.0);
}
