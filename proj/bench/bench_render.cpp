// Serial untiled reference compositor against the OpenMP tiled rasterizer.
#include <benchmark/benchmark.h>

#include <cmath>

#include "splatdrop/camera.hpp"
#include "splatdrop/gaussian_model.hpp"
#include "splatdrop/metrics.hpp"
#include "splatdrop/parallel.hpp"
#include "splatdrop/rasterizer.hpp"
#include "splatdrop/reference.hpp"

using namespace splatdrop;

namespace {

GaussianCloud scene(std::size_t n) {
  AxisAlignedBox box;
  GaussianCloud c = init_random_cloud(box, n, 3, 2.0, 1);
  for (std::size_t i = 0; i < n; ++i) c.set_opacity_logit(i, logit(0.6));
  return c;
}

Camera camera(int size) {
  return Camera::look_at({0, 0, -4}, {0, 0, 0}, {0, -1, 0}, 0.8, size, size);
}

void BM_ReferenceRender(benchmark::State& state) {
  const GaussianCloud c = scene(state.range(0));
  const Camera cam = camera(int(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::render(c, cam, {}, Eigen::Vector3d::Zero()));
}

void BM_TiledRender(benchmark::State& state) {
  const GaussianCloud c = scene(state.range(0));
  const Camera cam = camera(int(state.range(1)));
  set_num_threads(int(state.range(2)));
  RenderOptions opt;
  opt.precision = Precision::Float64;
  opt.early_stop = false;
  for (auto _ : state) benchmark::DoNotOptimize(render(c, cam, {}, opt));
  set_num_threads(0);
}

void BM_TiledForwardBackward(benchmark::State& state) {
  const GaussianCloud c = scene(state.range(0));
  const Camera cam = camera(int(state.range(1)));
  set_num_threads(int(state.range(2)));
  RenderOptions opt;
  opt.keep_record = true;
  const Image target(cam.width, cam.height, 3, 0.5);
  for (auto _ : state) {
    const RenderOutput out = render(c, cam, {}, opt);
    const LossValue l = gs_loss(out.color, target);
    benchmark::DoNotOptimize(render_backward(c, cam, *out.record, l.gradient));
  }
  set_num_threads(0);
}

}  // namespace

BENCHMARK(BM_ReferenceRender)->Args({200, 64})->Args({2000, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TiledRender)
    ->ArgsProduct({{200, 2000}, {64}, {1, 8}})
    ->ArgNames({"n", "px", "threads"})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();
BENCHMARK(BM_TiledForwardBackward)
    ->ArgsProduct({{2000, 20000}, {128}, {1, 8}})
    ->ArgNames({"n", "px", "threads"})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
