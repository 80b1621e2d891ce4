#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "splatdrop/camera.hpp"
#include "splatdrop/gaussian_model.hpp"
#include "splatdrop/projection.hpp"
#include "splatdrop/types.hpp"

namespace splatdrop {

inline constexpr double kAlphaMax = 0.99;
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kTransmittanceMin = 1e-4;

struct RenderOptions {
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  Precision precision = Precision::Float32;
  bool early_stop = true;
  bool keep_record = false;
  int sh_degree = -1;  // < 0: the cloud's degree
};

// One contributor of one pixel: source primitive, its alpha, and the
// transmittance in front of it. `slot` is the primitive's position in the
// pixel's tile list.
struct BlendEntry {
  std::uint32_t source;
  std::uint32_t slot;
  double alpha;
  double transmittance;
};

// Per-pixel front-to-back contributor lists of one forward pass, together with
// the projection they were built from. Consumed by the backward pass, the edge
// scorer and gradient maps.
struct BlendRecord {
  int width = 0;
  int height = 0;
  std::size_t num_primitives = 0;
  std::vector<std::uint32_t> pixel_offsets;  // width * height + 1 entries
  std::vector<BlendEntry> entries;
  std::vector<double> final_transmittance;
  ProjectedCloud projected;
  TileGrid grid;
  std::vector<std::uint8_t> keep;  // empty when rendered without a mask
  RenderOptions options;
  double far = 0.0;

  std::span<const BlendEntry> pixel(int x, int y) const {
    const std::size_t p = static_cast<std::size_t>(y) * width + x;
    return {entries.data() + pixel_offsets[p], entries.data() + pixel_offsets[p + 1]};
  }
};

struct RenderOutput {
  Image color;                 // 3 channels, pre-clamp
  Image depth;                 // 1 channel, sum w_i z_i + T_final * far
  Image final_transmittance;   // 1 channel
  std::vector<std::uint32_t> contributor_count;
  std::optional<BlendRecord> record;
};

// Pixel centres sit at (x + 0.5, y + 0.5).
inline Eigen::Vector2d pixel_center(int x, int y) { return {x + 0.5, y + 0.5}; }

// Whether the pixel centre lies inside the splat's extent disk.
bool covers(const ProjectedGaussian& g, const Eigen::Vector2d& pixel);

// min(0.99, o exp(-d^T inv_cov d / 2)), or nullopt below the 1/255 skip threshold.
std::optional<double> evaluate_alpha(const ProjectedGaussian& g, const Eigen::Vector2d& pixel,
                                     double opacity);

// Front-to-back alpha compositing over 16x16 tiles. `keep` (empty or one byte
// per primitive) marks primitives that take part; dropped ones are fully
// transparent. Throws std::invalid_argument on a mask length mismatch.
RenderOutput render(const GaussianCloud& cloud, const Camera& cam,
                    std::span<const std::uint8_t> keep = {}, const RenderOptions& options = {});

struct RenderGradients {
  ParamBlock params;
  std::vector<Eigen::Vector2d> mean2d;  // dL/d(pixel-space mean)
  std::vector<std::uint8_t> visible;    // radius > 0 in this view
};

// Reverse-mode pass for a forward render made with keep_record. d_color is
// dL/dC (3 channels); d_depth is dL/dD (1 channel) or null.
RenderGradients render_backward(const GaussianCloud& cloud, const Camera& cam,
                                const BlendRecord& record, const Image& d_color,
                                const Image* d_depth = nullptr);

// Splats per-primitive magnitudes with their blend weights, then divides by the
// image maximum (all-zero input gives a black image).
Image gradient_map(const BlendRecord& record, std::span<const double> magnitudes);

}  // namespace splatdrop
