#include "splatdrop/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "splatdrop/sh.hpp"

namespace splatdrop {

bool covers(const ProjectedGaussian& g, const Eigen::Vector2d& pixel) {
  const Eigen::Vector2d d = pixel - g.mean2d;
  const double r = g.extent_radius;
  return g.visible() && d.squaredNorm() <= r * r;
}

std::optional<double> evaluate_alpha(const ProjectedGaussian& g, const Eigen::Vector2d& pixel,
                                     double opacity) {
  const Eigen::Vector2d d = pixel - g.mean2d;
  const double q = d.dot(g.inv_cov2d * d);
  const double alpha = std::min(kAlphaMax, opacity * std::exp(-0.5 * q));
  if (alpha < kAlphaMin) return std::nullopt;
  return alpha;
}

namespace {

// Splat attributes of one tile list, gathered into contiguous arrays.
template <typename T>
struct TileSplats {
  std::vector<T> mx, my, a, b, c, opacity, r2, depth;
  std::vector<T> rgb;  // 3 per entry
  // Loose bound on q beyond which alpha is certainly below the skip
  // threshold, and the matching screen radius. Both only avoid work.
  std::vector<T> q_skip;
  std::vector<double> reach;

  void load(const ProjectedCloud& pc, const std::vector<std::uint32_t>& list) {
    const std::size_t n = list.size();
    for (auto* v : {&mx, &my, &a, &b, &c, &opacity, &r2, &depth, &q_skip}) v->resize(n);
    rgb.resize(3 * n);
    reach.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const ProjectedGaussian& g = pc.splats[list[k]];
      mx[k] = static_cast<T>(g.mean2d.x());
      my[k] = static_cast<T>(g.mean2d.y());
      a[k] = static_cast<T>(g.inv_cov2d(0, 0));
      b[k] = static_cast<T>(g.inv_cov2d(0, 1));
      c[k] = static_cast<T>(g.inv_cov2d(1, 1));
      opacity[k] = static_cast<T>(pc.opacities[list[k]]);
      r2[k] = static_cast<T>(g.extent_radius) * static_cast<T>(g.extent_radius);
      depth[k] = static_cast<T>(g.depth);
      for (int ch = 0; ch < 3; ++ch) rgb[3 * k + ch] = static_cast<T>(pc.colors[list[k]][ch]);
      const double qmax = 2.0 * std::log(std::max(pc.opacities[list[k]], 1e-300) / kAlphaMin);
      const double qloose = qmax * (1.0 + 1e-4) + 1e-4;
      q_skip[k] = static_cast<T>(qloose);
      const double lmax = 0.5 * (g.cov2d(0, 0) + g.cov2d(1, 1)) +
                          std::sqrt(0.25 * (g.cov2d(0, 0) - g.cov2d(1, 1)) * (g.cov2d(0, 0) - g.cov2d(1, 1)) +
                                    g.cov2d(0, 1) * g.cov2d(0, 1));
      const double r_alpha = qloose > 0.0 ? std::sqrt(qloose * lmax) * (1.0 + 1e-4) + 1e-4 : 0.0;
      reach[k] = std::min(g.extent_radius * (1.0 + 1e-6) + 1e-6, r_alpha);
    }
  }
};

struct TileResult {
  std::vector<BlendEntry> entries;
  std::vector<std::uint32_t> counts;  // per tile pixel, tile-local row-major
  std::vector<std::size_t> starts;    // first entry of each tile pixel
};

constexpr int kBlockSize = 4;

template <typename T>
void forward_tiles(const ProjectedCloud& pc, const TileGrid& grid,
                   std::span<const std::uint8_t> keep, const RenderOptions& opt, double far,
                   RenderOutput& out, std::vector<TileResult>* records) {
  const int W = pc.width, H = pc.height;
  const T alpha_max = static_cast<T>(kAlphaMax);
  const T alpha_min = static_cast<T>(kAlphaMin);
  const T t_min = static_cast<T>(kTransmittanceMin);
  const T bg[3] = {static_cast<T>(opt.background.x()), static_cast<T>(opt.background.y()),
                   static_cast<T>(opt.background.z())};
  const T far_t = static_cast<T>(far);
  const bool masked = !keep.empty();

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(grid.tiles.size()); ++t) {
    const int tx = static_cast<int>(t % grid.tiles_x), ty = static_cast<int>(t / grid.tiles_x);
    const auto& list = grid.tiles[t];
    TileSplats<T> s;
    s.load(pc, list);
    const int x0 = tx * kTileSize, y0 = ty * kTileSize;
    const int x1 = std::min(W, x0 + kTileSize), y1 = std::min(H, y0 + kTileSize);
    TileResult* rec = records ? &(*records)[t] : nullptr;
    if (rec) rec->counts.assign(static_cast<std::size_t>(x1 - x0) * (y1 - y0), 0);
    if (rec) rec->starts.assign(rec->counts.size(), 0);
    auto shade_pixel = [&](int x, int y, const std::vector<std::uint32_t>& near) {
      const T px = static_cast<T>(x) + T(0.5), py = static_cast<T>(y) + T(0.5);
      T tr = 1;
      T acc[4] = {0, 0, 0, 0};
      std::uint32_t count = 0;
      const std::size_t local = static_cast<std::size_t>(y - y0) * (x1 - x0) + (x - x0);
      if (rec) rec->starts[local] = rec->entries.size();
      for (std::uint32_t k : near) {
        const T dx = px - s.mx[k], dy = py - s.my[k];
        if (dx * dx + dy * dy > s.r2[k]) continue;
        const T q = s.a[k] * dx * dx + T(2) * s.b[k] * dx * dy + s.c[k] * dy * dy;
        if (q > s.q_skip[k]) continue;
        const T alpha = std::min(alpha_max, s.opacity[k] * std::exp(T(-0.5) * q));
        if (alpha < alpha_min) continue;
        const T next = tr * (T(1) - alpha);
        if (opt.early_stop && next < t_min) break;
        const T w = alpha * tr;
        acc[0] += w * s.rgb[3 * k];
        acc[1] += w * s.rgb[3 * k + 1];
        acc[2] += w * s.rgb[3 * k + 2];
        acc[3] += w * s.depth[k];
        if (rec) {
          rec->entries.push_back(
              {list[k], k, static_cast<double>(alpha), static_cast<double>(tr)});
        }
        tr = next;
        ++count;
      }
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      for (int ch = 0; ch < 3; ++ch) {
        out.color.data[3 * p + ch] = static_cast<double>(acc[ch] + tr * bg[ch]);
      }
      out.depth.data[p] = static_cast<double>(acc[3] + tr * far_t);
      out.final_transmittance.data[p] = static_cast<double>(tr);
      out.contributor_count[p] = count;
      if (rec) rec->counts[local] = count;
    };
    // Pixels are visited in small blocks; each block first narrows the tile
    // list to splats whose disk can reach it, keeping depth order.
    std::vector<std::uint32_t> near;
    near.reserve(list.size());
    for (int by = y0; by < y1; by += kBlockSize) {
      for (int bx = x0; bx < x1; bx += kBlockSize) {
        const int bx1 = std::min(x1, bx + kBlockSize), by1 = std::min(y1, by + kBlockSize);
        near.clear();
        for (std::size_t k = 0; k < list.size(); ++k) {
          if (masked && !keep[list[k]]) continue;
          if (s.reach[k] <= 0.0) continue;
          const Eigen::Vector2d& m = pc.splats[list[k]].mean2d;
          if (disk_intersects_rect(m, s.reach[k], bx + 0.5, by + 0.5, bx1 - 0.5, by1 - 0.5)) {
            near.push_back(static_cast<std::uint32_t>(k));
          }
        }
        for (int y = by; y < by1; ++y) {
          for (int x = bx; x < bx1; ++x) shade_pixel(x, y, near);
        }
      }
    }
  }
}

void assemble_record(const TileGrid& grid, std::vector<TileResult>& tiles, BlendRecord& rec) {
  const int W = rec.width, H = rec.height;
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(W) * H, 0);
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const int tx = static_cast<int>(t % grid.tiles_x), ty = static_cast<int>(t / grid.tiles_x);
    const int x0 = tx * kTileSize, y0 = ty * kTileSize;
    const int x1 = std::min(W, x0 + kTileSize), y1 = std::min(H, y0 + kTileSize);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        counts[static_cast<std::size_t>(y) * W + x] =
            tiles[t].counts[static_cast<std::size_t>(y - y0) * (x1 - x0) + (x - x0)];
  }
  rec.pixel_offsets.assign(counts.size() + 1, 0);
  for (std::size_t p = 0; p < counts.size(); ++p) {
    rec.pixel_offsets[p + 1] = rec.pixel_offsets[p] + counts[p];
  }
  rec.entries.resize(rec.pixel_offsets.back());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tiles.size()); ++t) {
    const int tx = static_cast<int>(t % grid.tiles_x), ty = static_cast<int>(t / grid.tiles_x);
    const int x0 = tx * kTileSize, y0 = ty * kTileSize;
    const int x1 = std::min(W, x0 + kTileSize), y1 = std::min(H, y0 + kTileSize);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * W + x;
        const std::size_t local = static_cast<std::size_t>(y - y0) * (x1 - x0) + (x - x0);
        std::copy_n(tiles[t].entries.begin() + tiles[t].starts[local], counts[p],
                    rec.entries.begin() + rec.pixel_offsets[p]);
      }
    std::vector<BlendEntry>().swap(tiles[t].entries);
  }
}

}  // namespace

RenderOutput render(const GaussianCloud& cloud, const Camera& cam,
                    std::span<const std::uint8_t> keep, const RenderOptions& options) {
  if (!keep.empty() && keep.size() != cloud.size()) {
    throw std::invalid_argument("render: mask length " + std::to_string(keep.size()) +
                                " does not match cloud size " + std::to_string(cloud.size()));
  }
  cam.validate();
  ProjectedCloud pc = project_cloud(cloud, cam, options.sh_degree);
  TileGrid grid = bin_and_sort(pc.splats, cam.width, cam.height);

  RenderOutput out;
  out.color = Image(cam.width, cam.height, 3);
  out.depth = Image(cam.width, cam.height, 1);
  out.final_transmittance = Image(cam.width, cam.height, 1);
  out.contributor_count.assign(out.color.pixel_count(), 0);

  std::vector<TileResult> tiles;
  if (options.keep_record) tiles.resize(grid.tiles.size());
  auto* tiles_ptr = options.keep_record ? &tiles : nullptr;
  if (options.precision == Precision::Float64) {
    forward_tiles<double>(pc, grid, keep, options, cam.far, out, tiles_ptr);
  } else {
    forward_tiles<float>(pc, grid, keep, options, cam.far, out, tiles_ptr);
  }

  if (options.keep_record) {
    BlendRecord rec;
    rec.width = cam.width;
    rec.height = cam.height;
    rec.num_primitives = cloud.size();
    assemble_record(grid, tiles, rec);
    rec.final_transmittance = out.final_transmittance.data;
    rec.projected = std::move(pc);
    rec.grid = std::move(grid);
    rec.keep.assign(keep.begin(), keep.end());
    rec.options = options;
    rec.far = cam.far;
    out.record = std::move(rec);
  }
  return out;
}

namespace {

// Per tile-slot accumulator of screen-space gradients.
enum Slot { kMx, kMy, kConA, kConB, kConC, kOpacity, kR, kG, kB, kDepth, kSlotWidth };

template <typename T>
void backward_tiles(const BlendRecord& rec, const Image& d_color, const Image* d_depth,
                    const std::vector<std::size_t>& tile_base, std::vector<double>& slots) {
  const ProjectedCloud& pc = rec.projected;
  const TileGrid& grid = rec.grid;
  const int W = rec.width, H = rec.height;
  const T bg[3] = {static_cast<T>(rec.options.background.x()),
                   static_cast<T>(rec.options.background.y()),
                   static_cast<T>(rec.options.background.z())};
  const T far_t = static_cast<T>(rec.far);
  const T alpha_max = static_cast<T>(kAlphaMax);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(grid.tiles.size()); ++t) {
    const int tx = static_cast<int>(t % grid.tiles_x), ty = static_cast<int>(t / grid.tiles_x);
    const auto& list = grid.tiles[t];
    if (list.empty()) continue;
    TileSplats<T> s;
    s.load(pc, list);
    double* acc = slots.data() + tile_base[t] * kSlotWidth;
    const int x0 = tx * kTileSize, y0 = ty * kTileSize;
    const int x1 = std::min(W, x0 + kTileSize), y1 = std::min(H, y0 + kTileSize);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * W + x;
        const auto entries = rec.pixel(x, y);
        if (entries.empty()) continue;
        T g[4];
        for (int ch = 0; ch < 3; ++ch) g[ch] = static_cast<T>(d_color.data[3 * p + ch]);
        g[3] = d_depth ? static_cast<T>(d_depth->data[p]) : T(0);
        if (g[0] == T(0) && g[1] == T(0) && g[2] == T(0) && g[3] == T(0)) continue;
        const T px = static_cast<T>(x) + T(0.5), py = static_cast<T>(y) + T(0.5);
        T behind[4] = {bg[0], bg[1], bg[2], far_t};
        for (std::size_t e = entries.size(); e-- > 0;) {
          const BlendEntry& be = entries[e];
          const std::size_t k = be.slot;
          const T alpha = static_cast<T>(be.alpha);
          const T tr = static_cast<T>(be.transmittance);
          const T w = alpha * tr;
          const T f[4] = {s.rgb[3 * k], s.rgb[3 * k + 1], s.rgb[3 * k + 2], s.depth[k]};
          T d_alpha = 0;
          for (int ch = 0; ch < 4; ++ch) {
            d_alpha += (f[ch] - behind[ch]) * g[ch];
            behind[ch] = alpha * f[ch] + (T(1) - alpha) * behind[ch];
          }
          d_alpha *= tr;
          double* a = acc + k * kSlotWidth;
          a[kR] += static_cast<double>(w * g[0]);
          a[kG] += static_cast<double>(w * g[1]);
          a[kB] += static_cast<double>(w * g[2]);
          a[kDepth] += static_cast<double>(w * g[3]);
          const T dx = px - s.mx[k], dy = py - s.my[k];
          const T q = s.a[k] * dx * dx + T(2) * s.b[k] * dx * dy + s.c[k] * dy * dy;
          const T gauss = std::exp(T(-0.5) * q);
          if (s.opacity[k] * gauss > alpha_max) continue;  // capped: flat in every input
          a[kOpacity] += static_cast<double>(d_alpha * gauss);
          const T d_q = T(-0.5) * alpha * d_alpha;
          // q = a dx^2 + 2 b dx dy + c dy^2 with d = pixel - mean
          a[kMx] += static_cast<double>(-d_q * (T(2) * s.a[k] * dx + T(2) * s.b[k] * dy));
          a[kMy] += static_cast<double>(-d_q * (T(2) * s.b[k] * dx + T(2) * s.c[k] * dy));
          a[kConA] += static_cast<double>(d_q * dx * dx);
          a[kConB] += static_cast<double>(d_q * T(2) * dx * dy);
          a[kConC] += static_cast<double>(d_q * dy * dy);
        }
      }
    }
  }
}

// d Sigma / d q-hat contracted with dL/dR for R = R(q-hat), q-hat = (w, x, y, z).
Eigen::Vector4d rotation_gradient(const Eigen::Vector4d& q, const Eigen::Matrix3d& dr) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Vector4d g;
  g[0] = 2 * (-z * dr(0, 1) + y * dr(0, 2) + z * dr(1, 0) - x * dr(1, 2) - y * dr(2, 0) +
              x * dr(2, 1));
  g[1] = 2 * (y * dr(0, 1) + z * dr(0, 2) + y * dr(1, 0) - 2 * x * dr(1, 1) - w * dr(1, 2) +
              z * dr(2, 0) + w * dr(2, 1) - 2 * x * dr(2, 2));
  g[2] = 2 * (-2 * y * dr(0, 0) + x * dr(0, 1) + w * dr(0, 2) + x * dr(1, 0) + z * dr(1, 2) -
              w * dr(2, 0) + z * dr(2, 1) - 2 * y * dr(2, 2));
  g[3] = 2 * (-2 * z * dr(0, 0) - w * dr(0, 1) + x * dr(0, 2) + w * dr(1, 0) - 2 * z * dr(1, 1) +
              y * dr(1, 2) + x * dr(2, 0) + y * dr(2, 1));
  return g;
}

}  // namespace

RenderGradients render_backward(const GaussianCloud& cloud, const Camera& cam,
                                const BlendRecord& rec, const Image& d_color,
                                const Image* d_depth) {
  const std::size_t n = cloud.size();
  if (rec.num_primitives != n || rec.width != cam.width || rec.height != cam.height) {
    throw std::invalid_argument("render_backward: blend record does not match scene");
  }
  if (d_color.width != rec.width || d_color.height != rec.height || d_color.channels != 3) {
    throw std::invalid_argument("render_backward: colour gradient has the wrong shape");
  }
  if (d_depth && (d_depth->width != rec.width || d_depth->height != rec.height ||
                  d_depth->channels != 1)) {
    throw std::invalid_argument("render_backward: depth gradient has the wrong shape");
  }
  const TileGrid& grid = rec.grid;
  std::vector<std::size_t> tile_base(grid.tiles.size() + 1, 0);
  for (std::size_t t = 0; t < grid.tiles.size(); ++t) {
    tile_base[t + 1] = tile_base[t] + grid.tiles[t].size();
  }
  std::vector<double> slots(tile_base.back() * kSlotWidth, 0.0);
  if (rec.options.precision == Precision::Float64) {
    backward_tiles<double>(rec, d_color, d_depth, tile_base, slots);
  } else {
    backward_tiles<float>(rec, d_color, d_depth, tile_base, slots);
  }

  // Fixed-order reduction: tile by tile, slot by slot.
  std::vector<double> screen(n * kSlotWidth, 0.0);
  for (std::size_t t = 0; t < grid.tiles.size(); ++t) {
    const auto& list = grid.tiles[t];
    for (std::size_t k = 0; k < list.size(); ++k) {
      const double* src = slots.data() + (tile_base[t] + k) * kSlotWidth;
      double* dst = screen.data() + static_cast<std::size_t>(list[k]) * kSlotWidth;
      for (int j = 0; j < kSlotWidth; ++j) dst[j] += src[j];
    }
  }

  RenderGradients out;
  out.params = ParamBlock::zeros(n, cloud.sh_degree());
  out.mean2d.assign(n, Eigen::Vector2d::Zero());
  out.visible.assign(n, 0);
  const ProjectedCloud& pc = rec.projected;
  const int degree = rec.options.sh_degree < 0 ? cloud.sh_degree()
                                               : std::min(rec.options.sh_degree, cloud.sh_degree());
  const Eigen::Vector3d center = cam.center();
  const Eigen::Matrix3d& wrot = cam.rotation;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const ProjectedGaussian& g = pc.splats[i];
    if (!g.visible()) continue;
    if (!rec.keep.empty() && !rec.keep[i]) continue;
    out.visible[i] = 1;
    const double* sg = screen.data() + i * kSlotWidth;
    const Eigen::Vector2d d_mean(sg[kMx], sg[kMy]);
    out.mean2d[i] = d_mean;

    const double o = pc.opacities[i];
    out.params.row(Param::OpacityLogit, i)[0] = sg[kOpacity] * o * (1.0 - o);

    // colour -> SH coefficients and view direction
    const Eigen::Vector3d mu = cloud.mean(i);
    const Eigen::Vector3d v = mu - center;
    const double vnorm = v.norm();
    const Eigen::Vector3d dir = v / vnorm;
    Eigen::Vector3d d_raw(sg[kR], sg[kG], sg[kB]);
    for (int ch = 0; ch < 3; ++ch) {
      if (pc.raw_colors[i][ch] < 0.0) d_raw[ch] = 0.0;
    }
    const auto basis = sh_basis(degree, dir);
    double* gdc = out.params.row(Param::ShDc, i);
    for (int ch = 0; ch < 3; ++ch) gdc[ch] = basis[0] * d_raw[ch];
    Eigen::Vector3d d_mu = Eigen::Vector3d::Zero();
    if (degree > 0) {
      const auto dbasis = sh_basis_gradient(degree, dir);
      const double* rest = cloud.params.row(Param::ShRest, i);
      double* grest = out.params.row(Param::ShRest, i);
      Eigen::Vector3d d_dir = Eigen::Vector3d::Zero();
      const int kc = sh_coeff_count(degree);
      for (int j = 1; j < kc; ++j) {
        double s = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
          grest[(j - 1) * 3 + ch] = basis[j] * d_raw[ch];
          s += rest[(j - 1) * 3 + ch] * d_raw[ch];
        }
        d_dir += s * dbasis[j];
      }
      d_mu += (d_dir - dir * dir.dot(d_dir)) / vnorm;
    }

    // conic -> screen covariance
    const Eigen::Matrix2d& conic = g.inv_cov2d;
    Eigen::Matrix2d d_conic;
    d_conic << sg[kConA], 0.5 * sg[kConB], 0.5 * sg[kConB], sg[kConC];
    const Eigen::Matrix2d d_cov2d = -conic * d_conic * conic;

    const Eigen::Vector3d t = pc.cam_points[i];
    const Eigen::Matrix<double, 2, 3> jac = projection_jacobian(t, cam);
    const Eigen::Matrix3d cov3d = covariance3d(cloud.log_scale(i), cloud.rotation(i));
    const Eigen::Matrix3d cov_cam = wrot * cov3d * wrot.transpose();
    const Eigen::Matrix3d d_cov_cam = jac.transpose() * d_cov2d * jac;
    const Eigen::Matrix<double, 2, 3> d_jac = 2.0 * d_cov2d * jac * cov_cam;
    const Eigen::Matrix3d d_cov3d = wrot.transpose() * d_cov_cam * wrot;

    const double iz = 1.0 / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Eigen::Vector3d d_t = Eigen::Vector3d::Zero();
    d_t.x() += d_jac(0, 2) * (-cam.fx * iz2);
    d_t.y() += d_jac(1, 2) * (-cam.fy * iz2);
    d_t.z() += d_jac(0, 0) * (-cam.fx * iz2) + d_jac(0, 2) * (2.0 * cam.fx * t.x() * iz3) +
               d_jac(1, 1) * (-cam.fy * iz2) + d_jac(1, 2) * (2.0 * cam.fy * t.y() * iz3);
    d_t.x() += d_mean.x() * cam.fx * iz;
    d_t.y() += d_mean.y() * cam.fy * iz;
    d_t.z() += -d_mean.x() * cam.fx * t.x() * iz2 - d_mean.y() * cam.fy * t.y() * iz2;
    d_t.z() += sg[kDepth];
    d_mu += wrot.transpose() * d_t;
    std::copy_n(d_mu.data(), 3, out.params.row(Param::Mean, i));

    // Sigma = M M^T with M = R S
    const Eigen::Vector4d q = cloud.rotation(i);
    const double qn = q.norm();
    const Eigen::Vector4d qhat = q / qn;
    const Eigen::Matrix3d r = quaternion_to_matrix(qhat);
    const Eigen::Vector3d s = cloud.scale(i);
    const Eigen::Matrix3d m = r * s.asDiagonal();
    const Eigen::Matrix3d d_m = 2.0 * d_cov3d * m;
    double* gls = out.params.row(Param::LogScale, i);
    Eigen::Matrix3d d_r;
    for (int k = 0; k < 3; ++k) {
      gls[k] = r.col(k).dot(d_m.col(k)) * s[k];
      d_r.col(k) = d_m.col(k) * s[k];
    }
    const Eigen::Vector4d d_qhat = rotation_gradient(qhat, d_r);
    const Eigen::Vector4d d_q = (d_qhat - qhat * qhat.dot(d_qhat)) / qn;
    std::copy_n(d_q.data(), 4, out.params.row(Param::Rotation, i));
  }
  return out;
}

Image gradient_map(const BlendRecord& rec, std::span<const double> magnitudes) {
  if (magnitudes.size() != rec.num_primitives) {
    throw std::invalid_argument("gradient_map: one magnitude per primitive required");
  }
  Image out(rec.width, rec.height, 1);
  double peak = 0.0;
  for (int y = 0; y < rec.height; ++y) {
    for (int x = 0; x < rec.width; ++x) {
      double v = 0.0;
      for (const BlendEntry& e : rec.pixel(x, y)) v += e.alpha * e.transmittance * magnitudes[e.source];
      out.at(x, y) = v;
      peak = std::max(peak, v);
    }
  }
  if (peak > 0.0) {
    for (double& v : out.data) v /= peak;
  }
  return out;
}

}  // namespace splatdrop
