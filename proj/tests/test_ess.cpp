#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "splatdrop/ess.hpp"
#include "splatdrop/rasterizer.hpp"
#include "splatdrop/reference.hpp"

using namespace splatdrop;
using namespace testutil;

namespace {

double luma(const Image& img, int x, int y) {
  x = std::clamp(x, 0, img.width - 1);
  y = std::clamp(y, 0, img.height - 1);
  return 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
}

// Unnormalized Sobel magnitude evaluated directly from the kernels.
double sobel_direct(const Image& img, int x, int y) {
  const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  double gx = 0, gy = 0;
  for (int j = -1; j <= 1; ++j)
    for (int i = -1; i <= 1; ++i) {
      gx += kx[j + 1][i + 1] * luma(img, x + i, y + j);
      gy += ky[j + 1][i + 1] * luma(img, x + i, y + j);
    }
  return std::hypot(gx, gy);
}

struct Scored {
  GaussianCloud cloud;
  Camera cam;
  RenderOutput out;
};

Scored scored_scene(std::uint64_t seed, int n = 12) {
  Scored s{micro_scene(seed, {.max_primitives = n}), front_camera(32, 32), {}};
  RenderOptions opt;
  opt.precision = Precision::Float64;
  opt.keep_record = true;
  opt.early_stop = false;
  s.out = render(s.cloud, s.cam, {}, opt);
  return s;
}

}  // namespace

TEST_CASE("sobel edge map") {
  Image flat(10, 8, 3, 0.4);
  for (double v : sobel_edge_map(flat).data) CHECK(v == 0.0);

  SUBCASE("vertical step peaks on both sides of the edge") {
    const int c = 5;
    Image step(12, 6, 3, 0.0);
    for (int y = 0; y < 6; ++y)
      for (int x = c; x < 12; ++x)
        for (int ch = 0; ch < 3; ++ch) step.at(x, y, ch) = 1.0;
    Image e = sobel_edge_map(step);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 12; ++x) CHECK(e.at(x, y) == ((x == c - 1 || x == c) ? 1.0 : 0.0));
  }
  SUBCASE("single bright pixel matches direct convolution") {
    Image dot(9, 9, 3, 0.0);
    for (int ch = 0; ch < 3; ++ch) dot.at(4, 4, ch) = 1.0;
    Image e = sobel_edge_map(dot);
    double mx = 0;
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) mx = std::max(mx, sobel_direct(dot, x, y));
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) CHECK(e.at(x, y) == doctest::Approx(sobel_direct(dot, x, y) / mx).epsilon(1e-14));
    CHECK(e.at(4, 4) == 0.0);
    CHECK(e.at(3, 4) > 0.0);
    CHECK(e.at(3, 3) > 0.0);
  }
  SUBCASE("random image matches direct convolution") {
    auto img = random_image(13, 11, 3, 4, 0.0, 1.0);
    Image e = sobel_edge_map(img);
    double mx = 0;
    for (int y = 0; y < 11; ++y)
      for (int x = 0; x < 13; ++x) mx = std::max(mx, sobel_direct(img, x, y));
    for (int y = 0; y < 11; ++y)
      for (int x = 0; x < 13; ++x) {
        CHECK(e.at(x, y) == doctest::Approx(sobel_direct(img, x, y) / mx).epsilon(1e-12));
        CHECK(e.at(x, y) >= 0.0);
        CHECK(e.at(x, y) <= 1.0);
      }
  }
}

TEST_CASE("per-view edge score matches compositing weights") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = scored_scene(seed);
    auto ref = reference::render(s.cloud, s.cam, {}, Eigen::Vector3d::Zero());
    Image edges = random_image(32, 32, 1, seed + 50, 0.0, 1.0);
    auto v = per_view_edge_score(*s.out.record, edges);
    std::vector<double> oracle(s.cloud.size(), 0.0);
    std::vector<std::uint32_t> count(s.cloud.size(), 0);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        for (const auto& wc : ref.weights[y * 32 + x]) {
          oracle[wc.source] += wc.weight * edges.at(x, y);
          ++count[wc.source];
        }
    for (std::size_t i = 0; i < s.cloud.size(); ++i) {
      CHECK(v.score[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
      CHECK(v.coverage[i] == count[i]);
      if (v.coverage[i] > 0) CHECK(v.score[i] / v.coverage[i] <= 1.0);
    }
  }
}

TEST_CASE("edge score properties") {
  auto s = scored_scene(3);
  Image edges = random_image(32, 32, 1, 7, 0.0, 1.0);
  auto base = per_view_edge_score(*s.out.record, edges);

  SUBCASE("zero map gives zero scores") {
    auto z = per_view_edge_score(*s.out.record, Image(32, 32, 1, 0.0));
    for (double v : z.score) CHECK(v == 0.0);
  }
  SUBCASE("linear in the edge map") {
    const double gamma = 0.5;
    Image half = edges;
    for (double& v : half.data) v *= gamma;
    auto h = per_view_edge_score(*s.out.record, half);
    for (std::size_t i = 0; i < base.score.size(); ++i) CHECK(h.score[i] == gamma * base.score[i]);
  }
  SUBCASE("unit map gives the blend mass") {
    auto u = per_view_edge_score(*s.out.record, Image(32, 32, 1, 1.0));
    std::vector<double> mass(s.cloud.size(), 0.0);
    for (const auto& e : s.out.record->entries) mass[e.source] += e.alpha * e.transmittance;
    for (std::size_t i = 0; i < mass.size(); ++i) CHECK(u.score[i] == doctest::Approx(mass[i]).epsilon(1e-12));
  }
  SUBCASE("resolution mismatch") {
    CHECK_THROWS_AS(per_view_edge_score(*s.out.record, Image(31, 32, 1)), std::invalid_argument);
  }
}

TEST_CASE("an opaque occluder suppresses the score behind it") {
  GaussianCloud c(2, 0);
  for (int i = 0; i < 2; ++i) {
    c.set_log_scale(i, Eigen::Vector3d::Constant(std::log(0.3)));
    c.set_base_color(i, {0.5, 0.5, 0.5});
  }
  c.set_mean(0, {0.0, 0.0, 0.5});
  c.set_opacity_logit(0, logit(0.8));
  RenderOptions opt;
  opt.keep_record = true;
  opt.precision = Precision::Float64;
  const Camera cam = front_camera(32, 32);
  Image edges(32, 32, 1, 1.0);

  c.set_mean(1, {3.0, 3.0, 0.0});  // off to the side: no occlusion
  auto open = per_view_edge_score(*render(c, cam, {}, opt).record, edges);
  c.set_mean(1, {0.0, 0.0, -0.5});  // directly in front
  c.set_log_scale(1, Eigen::Vector3d::Constant(std::log(3.0)));
  c.set_opacity_logit(1, logit(0.999));
  auto hidden = per_view_edge_score(*render(c, cam, {}, opt).record, edges);
  CHECK(open.score[0] > 0.0);
  CHECK(hidden.score[0] < 0.05 * open.score[0]);
}

TEST_CASE("aggregate_scores") {
  EdgeScoreTable t;
  t.views.push_back({{0.5}, {10}});
  CHECK(t.aggregate()[0] == doctest::Approx(0.05));
  t.views = {{{0.5, 0.2}, {10, 0}}, {{0.5, 0.3}, {10, 3}}, {{0.5, 0.0}, {10, 0}}};
  auto agg = aggregate_scores(t);
  CHECK(agg[0] == doctest::Approx(3 * 0.05));
  CHECK(agg[1] == doctest::Approx(0.1));

  CounterRng rng(5, Stream::Test);
  EdgeScoreTable r;
  for (int k = 0; k < 4; ++k) {
    ViewEdgeScore v;
    for (int i = 0; i < 20; ++i) {
      v.coverage.push_back(std::uint32_t(rng.below(5)));
      v.score.push_back(v.coverage.back() ? rng.uniform() * v.coverage.back() : 0.0);
    }
    r.views.push_back(v);
  }
  auto got = r.aggregate();
  for (int i = 0; i < 20; ++i) {
    double s = 0;
    for (const auto& v : r.views)
      if (v.coverage[i]) s += v.score[i] / v.coverage[i];
    CHECK(got[i] == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("ess_mask predicate") {
  auto c = micro_scene(8, {.max_primitives = 8});
  while (c.size() < 5) c = micro_scene(c.size() + 100, {.max_primitives = 8});
  CounterRng rng(6, Stream::Test);
  std::vector<double> scores(c.size());
  for (double& s : scores) s = rng.uniform(0.0, 0.2);

  auto none = ess_mask(c, scores, 0.0, INFINITY);
  for (bool b : none) CHECK_FALSE(b);
  auto all = ess_mask(c, scores, 0.0, 0.0);
  for (bool b : all) CHECK(b);

  for (int t = 0; t < 50; ++t) {
    const double st = rng.uniform(0.05, 0.4), et = rng.uniform(0.0, 0.2);
    auto m = ess_mask(c, scores, st, et);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(m[i] == (c.max_scale(i) >= st && scores[i] >= et));
    auto lower = ess_mask(c, scores, st, et * 0.5);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK((!m[i] || lower[i]));
  }
  CHECK_THROWS_AS(ess_mask(c, std::vector<double>(c.size() + 1), 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("apply_ess") {
  auto c = micro_scene(9, {.max_primitives = 8, .sh_degree = 1});
  CounterRng rng(1, Stream::Ess);
  auto same = apply_ess(c, std::vector<bool>(c.size(), false), rng);
  CHECK(same.cloud == c);

  std::vector<bool> one(c.size(), false);
  one[0] = true;
  auto split = apply_ess(c, one, rng);
  CHECK(split.cloud.size() == c.size() + 1);
  for (std::size_t k = 0; k < split.cloud.size(); ++k) CHECK(split.source_rows[k] != 0);

  std::vector<bool> half(c.size(), false);
  double before = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < c.size(); i += 2) {
    half[i] = true;
    before += c.max_scale(i);
    ++count;
  }
  auto edit = apply_ess(c, half, rng);
  double after = 0;
  for (std::size_t k = edit.cloud.size() - 2 * count; k < edit.cloud.size(); ++k) after += edit.cloud.max_scale(k);
  CHECK(after / (2 * count) == doctest::Approx(before / count / 1.6).epsilon(1e-12));
}

TEST_CASE("ess config validation") {
  EssConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.edge_threshold = -1;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.scale_multiplier = 0;
  CHECK_THROWS(cfg.validate());
}
