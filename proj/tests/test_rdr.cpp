#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "locality.hpp"
#include "splatdrop/metrics.hpp"
#include "splatdrop/rasterizer.hpp"
#include "splatdrop/rdr.hpp"

using namespace splatdrop;
using namespace testutil;

TEST_CASE("sample_mask extremes and errors") {
  auto keep_all = sample_mask(1000, 0.0, 1, 1);
  CHECK(keep_all.kept() == 1000);
  auto drop_all = sample_mask(1000, 1.0, 1, 1);
  CHECK(drop_all.kept() == 0);
  CHECK_THROWS_AS(sample_mask(10, -0.1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_mask(10, 1.5, 1, 1), std::invalid_argument);
  CHECK(sample_mask(0, 0.4, 1, 1).size() == 0);
}

TEST_CASE("sample_mask keep fraction") {
  const std::size_t n = 100000;
  auto m = sample_mask(n, 0.4, 3, 17);
  const double frac = double(m.kept()) / n;
  // 3 sigma of Binomial(1e5, 0.6) is 0.0046.
  CHECK(std::abs(frac - 0.6) < 0.005);
}

TEST_CASE("sample_mask is reproducible from seed and iteration") {
  auto a = sample_mask(5000, 0.3, 9, 42);
  auto b = sample_mask(5000, 0.3, 9, 42);
  CHECK(a.bits == b.bits);
  CHECK(a.seed == 9);
  CHECK(a.iteration == 42);
  CHECK(sample_mask(5000, 0.3, 9, 43).bits != a.bits);
  CHECK(sample_mask(5000, 0.3, 10, 42).bits != a.bits);
}

TEST_CASE("rdr_loss closed forms") {
  Image one(8, 8, 3, 1.0), zero(8, 8, 3, 0.0);
  CHECK(rdr_loss(one, one).value == 0.0);
  CHECK(rdr_loss(one, zero).value ==
        doctest::Approx(1.0 + (1.0 - kSsimC1 / (1.0 + kSsimC1))).epsilon(1e-12));
  CHECK_THROWS_AS(rdr_loss(one, Image(8, 7, 3)), std::invalid_argument);
}

TEST_CASE("sub_model_render identities") {
  auto c = micro_scene(21, {.max_primitives = 30});
  const Camera cam = front_camera(32, 32);
  RenderOptions opt;
  opt.background = {0.25, 0.5, 0.75};

  SUBCASE("p = 0 equals the full render bit for bit") {
    auto full = render(c, cam, {}, opt);
    auto sub = sub_model_render(c, cam, sample_mask(c.size(), 0.0, 1, 1), opt);
    CHECK(sub.color.data == full.color.data);
    CHECK(sub.depth.data == full.depth.data);
    CHECK(rdr_loss(full.color, sub.color).value == 0.0);
  }
  SUBCASE("p = 1 gives the background") {
    auto sub = sub_model_render(c, cam, sample_mask(c.size(), 1.0, 1, 1), opt);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        for (int ch = 0; ch < 3; ++ch) CHECK(sub.color.at(x, y, ch) == opt.background[ch]);
  }
  SUBCASE("no opacity compensation") {
    auto mask = sample_mask(c.size(), 0.4, 2, 2);
    REQUIRE(mask.kept() > 0);
    REQUIRE(mask.kept() < c.size());
    GaussianCloud compensated = c;
    for (std::size_t i = 0; i < c.size(); ++i)
      compensated.set_opacity_logit(i, logit(std::min(0.999, c.opacity(i) / (1.0 - 0.4))));
    auto plain = sub_model_render(c, cam, mask, opt);
    auto comp = sub_model_render(compensated, cam, mask, opt);
    CHECK(max_abs_diff(plain.color, comp.color) > 1e-3);
    // The kept primitives composite exactly as in a cloud that only holds them.
    std::vector<bool> keep(mask.bits.begin(), mask.bits.end());
    auto pruned = render(prune(c, keep), cam, {}, opt);
    CHECK(max_abs_diff(pruned.color, plain.color) < 1e-6);
  }
  SUBCASE("mask length is checked") {
    DropoutMask bad;
    bad.bits.assign(c.size() + 2, 1);
    CHECK_THROWS_AS(sub_model_render(c, cam, bad, opt), std::invalid_argument);
  }
}

TEST_CASE("ensemble_render") {
  auto c = micro_scene(22, {.max_primitives = 40});
  const Camera cam = front_camera(24, 24);
  RenderOptions opt;
  opt.precision = Precision::Float64;

  CHECK_THROWS_AS(ensemble_render(c, cam, 0, 0.3, 1, opt), std::invalid_argument);

  auto full = render(c, cam, {}, opt);
  for (std::size_t k : {1u, 5u}) CHECK(max_abs_diff(ensemble_render(c, cam, k, 0.0, 1, opt), full.color) < 1e-15);

  // K = 1 reproduces the first ensemble member.
  auto one = ensemble_render(c, cam, 1, 0.3, 7, opt);
  CHECK(max_abs_diff(one, sub_model_render(c, cam, sample_mask(c.size(), 0.3, 7, 0, Stream::Ensemble), opt).color) == 0.0);

  // Variance of the K-mean falls like 1/K: K = 64 vs K = 8 should be near 1/8.
  auto pixel_variance = [&](std::size_t k) {
    const int trials = 24;
    std::vector<Image> samples;
    for (int t = 0; t < trials; ++t) samples.push_back(ensemble_render(c, cam, k, 0.3, 1000 + t, opt));
    double total = 0.0;
    for (std::size_t i = 0; i < full.color.data.size(); ++i) {
      double m = 0.0, s = 0.0;
      for (const auto& img : samples) m += img.data[i];
      m /= trials;
      for (const auto& img : samples) s += (img.data[i] - m) * (img.data[i] - m);
      total += s / (trials - 1);
    }
    return total;
  };
  const double v8 = pixel_variance(8), v64 = pixel_variance(64);
  REQUIRE(v8 > 0.0);
  CHECK(v64 < 2.0 * v8 / 8.0);
}

TEST_CASE("dropping one primitive only moves gradients near it") {
  std::size_t far = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto r = check_locality(seed);
    CHECK(r.violations_l1 == 0);
    CHECK(r.violations_dilated == 0);
    far += r.far_dilated;
  }
  CHECK(far > 0);
}
