#include "splatdrop/gaussian_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "splatdrop/sh.hpp"

namespace splatdrop {

const char* param_name(Param p) {
  switch (p) {
    case Param::Mean: return "mean";
    case Param::LogScale: return "log_scale";
    case Param::Rotation: return "rotation";
    case Param::OpacityLogit: return "opacity_logit";
    case Param::ShDc: return "sh_dc";
    case Param::ShRest: return "sh_rest";
  }
  return "?";
}

int ParamBlock::width(Param p) const {
  switch (p) {
    case Param::Mean:
    case Param::LogScale:
    case Param::ShDc: return 3;
    case Param::Rotation: return 4;
    case Param::OpacityLogit: return 1;
    case Param::ShRest: return 3 * (sh_coeff_count(sh_degree) - 1);
  }
  return 0;
}

ParamBlock ParamBlock::zeros(std::size_t n, int sh_degree) {
  if (sh_degree < 0 || sh_degree > 3) {
    throw std::invalid_argument("sh degree must be in [0, 3], got " + std::to_string(sh_degree));
  }
  ParamBlock b;
  b.sh_degree = sh_degree;
  for (Param p : kAllParams) b[p].assign(n * b.width(p), 0.0);
  return b;
}

ParamBlock ParamBlock::gather(std::span<const std::int64_t> rows) const {
  ParamBlock out = zeros(rows.size(), sh_degree);
  const std::size_t n = size();
  for (Param p : kAllParams) {
    const int w = width(p);
    const auto& src = (*this)[p];
    auto& dst = out[p];
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::int64_t r = rows[k];
      if (r < 0) continue;
      if (static_cast<std::size_t>(r) >= n) throw std::out_of_range("gather row out of range");
      std::copy_n(src.begin() + r * w, w, dst.begin() + k * w);
    }
  }
  return out;
}

void ParamBlock::set_zero() {
  for (auto& g : groups) std::fill(g.begin(), g.end(), 0.0);
}

GaussianCloud::GaussianCloud(std::size_t n, int sh_degree, double extent)
    : params(ParamBlock::zeros(n, sh_degree)), scene_extent(extent) {
  for (std::size_t i = 0; i < n; ++i) params.row(Param::Rotation, i)[0] = 1.0;
}

double GaussianCloud::opacity(std::size_t i) const { return sigmoid(opacity_logit(i)); }

void GaussianCloud::set_mean(std::size_t i, const Eigen::Vector3d& v) {
  std::copy_n(v.data(), 3, params.row(Param::Mean, i));
}
void GaussianCloud::set_log_scale(std::size_t i, const Eigen::Vector3d& v) {
  std::copy_n(v.data(), 3, params.row(Param::LogScale, i));
}
void GaussianCloud::set_rotation(std::size_t i, const Eigen::Vector4d& q) {
  std::copy_n(q.data(), 4, params.row(Param::Rotation, i));
}
void GaussianCloud::set_base_color(std::size_t i, const Eigen::Vector3d& rgb) {
  double* dc = params.row(Param::ShDc, i);
  for (int c = 0; c < 3; ++c) dc[c] = (rgb[c] - 0.5) / kShC0;
}

void GaussianCloud::normalize_rotations() {
  for (std::size_t i = 0; i < size(); ++i) {
    double* q = params.row(Param::Rotation, i);
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (n > 0.0) {
      for (int k = 0; k < 4; ++k) q[k] /= n;
    } else {
      q[0] = 1.0;
    }
  }
}

// Clamped so saturated logits still give an opacity strictly inside (0, 1).
double sigmoid(double x) {
  return std::clamp(1.0 / (1.0 + std::exp(-x)), std::numeric_limits<double>::min(),
                    std::nextafter(1.0, 0.0));
}
double logit(double p) { return std::log(p / (1.0 - p)); }

Eigen::Matrix3d quaternion_to_matrix(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Eigen::Matrix3d covariance3d(const Eigen::Vector3d& log_scale, const Eigen::Vector4d& rotation) {
  if (!log_scale.allFinite() || !rotation.allFinite() || rotation.norm() == 0.0) {
    throw std::invalid_argument("covariance3d: invalid scale or rotation");
  }
  const Eigen::Matrix3d r = quaternion_to_matrix(rotation.normalized());
  const Eigen::Matrix3d m = r * log_scale.array().exp().matrix().asDiagonal();
  return m * m.transpose();
}

namespace {

// Mean distance to the three nearest neighbours, via a uniform grid.
std::vector<double> mean_knn_distance(const std::vector<Eigen::Vector3d>& pts) {
  const std::size_t n = pts.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) {
    std::fill(out.begin(), out.end(), 0.01);
    return out;
  }
  Eigen::Vector3d lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d span = (hi - lo).cwiseMax(1e-9);
  const double cell = std::cbrt(span.prod() / static_cast<double>(n)) * 1.5;
  const Eigen::Vector3i dims =
      ((span / cell).array().floor().cast<int>() + 1).matrix().cwiseMax(1).cwiseMin(256);
  auto cell_of = [&](const Eigen::Vector3d& p) {
    Eigen::Vector3i c;
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<int>((p[a] - lo[a]) / span[a] * dims[a]), 0, dims[a] - 1);
    }
    return c;
  };
  const std::size_t ncells = static_cast<std::size_t>(dims.prod());
  std::vector<std::vector<std::uint32_t>> grid(ncells);
  auto flat = [&](const Eigen::Vector3i& c) {
    return (static_cast<std::size_t>(c.z()) * dims.y() + c.y()) * dims.x() + c.x();
  };
  for (std::size_t i = 0; i < n; ++i) grid[flat(cell_of(pts[i]))].push_back(static_cast<std::uint32_t>(i));
  const Eigen::Vector3d cell_size = span.cwiseQuotient(dims.cast<double>());
  const double min_cell = cell_size.minCoeff();
  const int k = static_cast<int>(std::min<std::size_t>(3, n - 1));

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Eigen::Vector3i c = cell_of(pts[i]);
    std::array<double, 3> best = {std::numeric_limits<double>::infinity(),
                                  std::numeric_limits<double>::infinity(),
                                  std::numeric_limits<double>::infinity()};
    for (int ring = 0;; ++ring) {
      for (int dz = -ring; dz <= ring; ++dz)
        for (int dy = -ring; dy <= ring; ++dy)
          for (int dx = -ring; dx <= ring; ++dx) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const Eigen::Vector3i q = c + Eigen::Vector3i(dx, dy, dz);
            if ((q.array() < 0).any() || (q.array() >= dims.array()).any()) continue;
            for (std::uint32_t j : grid[flat(q)]) {
              if (j == i) continue;
              const double d2 = (pts[j] - pts[i]).squaredNorm();
              if (d2 < best[2]) {
                best[2] = d2;
                std::sort(best.begin(), best.end());
              }
            }
          }
      const double reach = ring * min_cell;
      const bool all_cells = ring >= dims.maxCoeff();
      if (all_cells || (std::isfinite(best[k - 1]) && best[k - 1] <= reach * reach)) break;
    }
    double s = 0.0;
    for (int a = 0; a < k; ++a) s += best[a];
    out[i] = std::sqrt(std::max(s / k, 1e-14));
  }
  return out;
}

}  // namespace

GaussianCloud init_random_cloud(const AxisAlignedBox& box, std::size_t n, int sh_degree,
                                double scene_extent, std::uint64_t seed) {
  if ((box.max - box.min).minCoeff() <= 0.0) {
    throw std::invalid_argument("init_random_cloud: degenerate bounding box");
  }
  GaussianCloud cloud(n, sh_degree, scene_extent);
  CounterRng rng(seed, Stream::Init);
  std::vector<Eigen::Vector3d> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) pts[i][a] = rng.uniform(box.min[a], box.max[a]);
    cloud.set_mean(i, pts[i]);
    Eigen::Vector3d rgb(rng.uniform(), rng.uniform(), rng.uniform());
    cloud.set_base_color(i, rgb);
    cloud.set_opacity_logit(i, logit(0.1));
  }
  const std::vector<double> dist = mean_knn_distance(pts);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.set_log_scale(i, Eigen::Vector3d::Constant(std::log(dist[i])));
  }
  return cloud;
}

void split_primitive(const GaussianCloud& in, std::size_t index, CounterRng& rng,
                     GaussianCloud& out, std::size_t child_a, std::size_t child_b) {
  const Eigen::Vector3d mu = in.mean(index);
  const Eigen::Vector3d scale = in.scale(index);
  const Eigen::Matrix3d r = quaternion_to_matrix(in.rotation(index).normalized());
  const Eigen::Vector3d child_log_scale =
      in.log_scale(index).array() - std::log(kSplitScaleDivisor);
  for (std::size_t child : {child_a, child_b}) {
    for (Param p : kAllParams) {
      const int w = in.params.width(p);
      std::copy_n(in.params.row(p, index), w, out.params.row(p, child));
    }
    const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
    out.set_mean(child, mu + r * scale.cwiseProduct(z));
    out.set_log_scale(child, child_log_scale);
  }
}

StructuralEdit prune_edit(const GaussianCloud& cloud, const std::vector<bool>& keep) {
  if (keep.size() != cloud.size()) {
    throw std::invalid_argument("prune: mask length " + std::to_string(keep.size()) +
                                " does not match cloud size " + std::to_string(cloud.size()));
  }
  StructuralEdit edit;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) edit.source_rows.push_back(static_cast<std::int64_t>(i));
  }
  edit.cloud.params = cloud.params.gather(edit.source_rows);
  edit.cloud.scene_extent = cloud.scene_extent;
  return edit;
}

GaussianCloud prune(const GaussianCloud& cloud, const std::vector<bool>& keep) {
  return prune_edit(cloud, keep).cloud;
}

StructuralEdit split_masked(const GaussianCloud& cloud, const std::vector<bool>& mask,
                           CounterRng& rng) {
  if (mask.size() != cloud.size()) throw std::invalid_argument("split: mask length mismatch");
  StructuralEdit edit;
  std::vector<std::size_t> parents;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      parents.push_back(i);
    } else {
      edit.source_rows.push_back(static_cast<std::int64_t>(i));
    }
  }
  const std::size_t survivors = edit.source_rows.size();
  edit.source_rows.resize(survivors + 2 * parents.size(), -1);
  edit.cloud.params = cloud.params.gather(edit.source_rows);
  edit.cloud.scene_extent = cloud.scene_extent;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    split_primitive(cloud, parents[k], rng, edit.cloud, survivors + 2 * k, survivors + 2 * k + 1);
  }
  return edit;
}

StructuralEdit clone_masked(const GaussianCloud& cloud, const std::vector<bool>& mask) {
  if (mask.size() != cloud.size()) throw std::invalid_argument("clone: mask length mismatch");
  StructuralEdit edit;
  std::vector<std::int64_t> copy_rows;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    edit.source_rows.push_back(static_cast<std::int64_t>(i));
    if (mask[i]) copy_rows.push_back(static_cast<std::int64_t>(i));
  }
  std::vector<std::int64_t> rows = edit.source_rows;
  rows.insert(rows.end(), copy_rows.begin(), copy_rows.end());
  edit.cloud.params = cloud.params.gather(rows);
  edit.cloud.scene_extent = cloud.scene_extent;
  edit.source_rows.resize(rows.size(), -1);
  return edit;
}

}  // namespace splatdrop
